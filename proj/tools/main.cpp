// Command-line driver: wires the sampler/trainer/nerve/homology pipeline into
// reproducible experiment runs. Settings merge in order: built-in preset,
// then --config file, then --set overrides, then the named flags.

#include <CLI11.hpp>
#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include "atlasnerve/commands.hpp"
#include "atlasnerve/io.hpp"

namespace {

struct CommonArgs {
  std::string preset;
  std::string config_path;
  std::string out_dir;
  std::int64_t seed = -1;
  bool seed_set = false;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--preset", args.preset, "built-in experiment preset (circle|torus3|rp2)");
  cmd->add_option("--config", args.config_path, "flat key=value config file");
  cmd->add_option("--out", args.out_dir, "output directory");
  cmd->add_option("--seed", args.seed, "master seed (derives data/model/train/generate seeds)")
      ->trigger_on_parse();
  cmd->add_option("--set", args.overrides, "extra key=value override (repeatable)");
}

atlasnerve::FlatConfig merge_config(const CommonArgs& args, CLI::App* cmd) {
  atlasnerve::FlatConfig cfg;
  if (!args.preset.empty()) cfg = atlasnerve::preset_config(args.preset);
  if (!args.config_path.empty()) cfg.overlay(atlasnerve::FlatConfig::load(args.config_path));
  for (const auto& pair : args.overrides) cfg.overlay(atlasnerve::FlatConfig::parse(pair));
  if (!args.out_dir.empty()) cfg.set("out.dir", args.out_dir);
  if (cmd->count("--seed") > 0) cfg.set("seed", atlasnerve::format_int(args.seed));
  return cfg;
}

// "START:STOP:COUNT" -> nerve.grid.* keys
void apply_epsilon_grid(atlasnerve::FlatConfig& cfg, const std::string& spec) {
  auto parts = atlasnerve::split(spec, ':');
  if (parts.size() != 3)
    throw std::invalid_argument("--epsilon-grid expects START:STOP:COUNT, got '" + spec + "'");
  cfg.set("nerve.grid.start", parts[0]);
  cfg.set("nerve.grid.stop", parts[1]);
  cfg.set("nerve.grid.count", parts[2]);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"atlas fitting and topology readout"};
  app.require_subcommand(1);

  CommonArgs fit_args, nerve_args, gen_args, rec_args, sweep_args;

  auto* fit_cmd = app.add_subcommand("fit", "train an atlas on a dataset");
  add_common(fit_cmd, fit_args);
  std::int64_t fit_epochs = -1;
  fit_cmd->add_option("--epochs", fit_epochs, "override train.epochs");
  std::string fit_init;
  fit_cmd->add_option("--init", fit_init, "resume from an existing model file");

  auto* nerve_cmd = app.add_subcommand("nerve", "nerve and homology of a fitted atlas");
  add_common(nerve_cmd, nerve_args);
  std::string nerve_model, nerve_membership, epsilon_grid;
  double nerve_epsilon = -1.0;
  int nerve_method = 0;
  nerve_cmd->add_option("--model", nerve_model, "fitted model file");
  nerve_cmd->add_option("--membership", nerve_membership, "membership matrix CSV");
  nerve_cmd->add_option("--method", nerve_method, "overlap test: 1 witness, 2 expected");
  nerve_cmd->add_option("--epsilon", nerve_epsilon, "single tolerance instead of a sweep");
  nerve_cmd->add_option("--epsilon-grid", epsilon_grid, "geometric grid START:STOP:COUNT");

  auto* gen_cmd = app.add_subcommand("generate", "sample the prior through the decoders");
  add_common(gen_cmd, gen_args);
  std::string gen_model;
  std::int64_t gen_count = -1;
  gen_cmd->add_option("--model", gen_model, "fitted model file");
  gen_cmd->add_option("--count", gen_count, "number of samples");

  auto* rec_cmd = app.add_subcommand("reconstruct", "per-point round trips and errors");
  add_common(rec_cmd, rec_args);
  std::string rec_model, rec_data;
  rec_cmd->add_option("--model", rec_model, "fitted model file");
  rec_cmd->add_option("--data", rec_data, "dataset CSV (defaults to the configured sampler)");

  auto* sweep_cmd = app.add_subcommand("dim-sweep", "one training run per latent dimension");
  add_common(sweep_cmd, sweep_args);
  std::string d_list;
  sweep_cmd->add_option("--d-list", d_list, "comma-separated latent dimensions");

  CLI11_PARSE(app, argc, argv);

  try {
    if (fit_cmd->parsed()) {
      auto cfg = merge_config(fit_args, fit_cmd);
      if (fit_epochs >= 0) cfg.set("train.epochs", atlasnerve::format_int(fit_epochs));
      if (!fit_init.empty()) cfg.set("train.init", fit_init);
      atlasnerve::cmd_fit(cfg);
    } else if (nerve_cmd->parsed()) {
      auto cfg = merge_config(nerve_args, nerve_cmd);
      if (!nerve_model.empty()) cfg.set("nerve.model", nerve_model);
      if (!nerve_membership.empty()) cfg.set("nerve.membership_csv", nerve_membership);
      if (nerve_method != 0) cfg.set("nerve.method", atlasnerve::format_int(nerve_method));
      if (nerve_epsilon >= 0.0) cfg.set("nerve.epsilon", atlasnerve::format_double(nerve_epsilon));
      if (!epsilon_grid.empty()) apply_epsilon_grid(cfg, epsilon_grid);
      atlasnerve::cmd_nerve(cfg);
    } else if (gen_cmd->parsed()) {
      auto cfg = merge_config(gen_args, gen_cmd);
      if (!gen_model.empty()) cfg.set("generate.model", gen_model);
      if (gen_count >= 0) cfg.set("generate.count", atlasnerve::format_int(gen_count));
      atlasnerve::cmd_generate(cfg);
    } else if (rec_cmd->parsed()) {
      auto cfg = merge_config(rec_args, rec_cmd);
      if (!rec_model.empty()) cfg.set("reconstruct.model", rec_model);
      if (!rec_data.empty()) {
        cfg.set("data.sampler", "csv");
        cfg.set("data.csv", rec_data);
      }
      atlasnerve::cmd_reconstruct(cfg);
    } else if (sweep_cmd->parsed()) {
      auto cfg = merge_config(sweep_args, sweep_cmd);
      if (!d_list.empty()) cfg.set("dim_sweep.d_list", d_list);
      atlasnerve::cmd_dim_sweep(cfg);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
