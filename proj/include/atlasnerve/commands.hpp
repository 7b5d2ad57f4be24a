#pragma once

// Command implementations behind the CLI: fit, nerve, generate, reconstruct,
// dim-sweep. Each command reads a flat dotted-key config (preset < config
// file < command-line overrides, resolved by the caller), writes its outputs
// under out.dir, and drops a manifest that reproduces the run byte-for-byte
// (the manifest's wall_time line is the only non-deterministic output).
//
// Seeds: a master `seed` key feeds derive_seed(master, tag) with fixed tags
// (1 data, 2 model, 3 training, 4 generation) unless the specific key is set
// explicitly; the manifest always records the resolved values.

#include <chrono>
#include <filesystem>
#include <string>
#include <vector>

#include "atlasnerve/atlas.hpp"
#include "atlasnerve/io.hpp"
#include "atlasnerve/manifolds.hpp"
#include "atlasnerve/nerve.hpp"
#include "atlasnerve/trainer.hpp"

namespace atlasnerve {

// Bundled settings for the built-in experiments. Geometric defaults: linear
// encoders, 16-wide relu stacks, RMSprop 1e-3, batch 128.
inline FlatConfig preset_config(const std::string& name) {
  FlatConfig cfg;
  cfg.set("model.encoder", "linear");
  cfg.set("model.hidden.decoder", "16,16");
  cfg.set("model.hidden.membership", "16");
  // Affine membership logits: chart regions stay simply shaped, which the
  // nerve readout depends on.
  cfg.set("model.membership_hidden_activation", "identity");
  cfg.set("model.hidden.discriminator", "16,16");
  cfg.set("train.batch_size", "128");
  cfg.set("train.learning_rate", "0.001");
  if (name == "circle") {
    cfg.set("data.sampler", "circle");
    cfg.set("data.count", "2000");
    cfg.set("model.latent_dim", "1");
    cfg.set("model.chart_count", "3");
    cfg.set("train.epochs", "1200");
  } else if (name == "torus3") {
    cfg.set("data.sampler", "torus3");
    cfg.set("data.count", "4000");
    cfg.set("model.latent_dim", "3");
    cfg.set("model.chart_count", "8");
    cfg.set("train.epochs", "300");
    cfg.set("dim_sweep.d_list", "1,2,3,4,5");
  } else if (name == "rp2") {
    cfg.set("data.sampler", "rp2");
    cfg.set("data.count", "10000");
    cfg.set("model.latent_dim", "2");
    cfg.set("model.chart_count", "8");
    cfg.set("train.epochs", "3000");
    // A second discriminator pass per batch keeps the eight charts better
    // organized on this surface.
    cfg.set("train.disc_steps", "2");
  } else {
    throw std::invalid_argument("unknown preset '" + name +
                                "' (available: circle, torus3, rp2)");
  }
  return cfg;
}

namespace detail {

inline std::uint64_t resolved_seed(const FlatConfig& cfg, const std::string& key,
                                   std::uint64_t stream_tag) {
  if (cfg.has(key)) return static_cast<std::uint64_t>(cfg.get_int(key, 0));
  auto master = static_cast<std::uint64_t>(cfg.get_int("seed", 1));
  return derive_seed(master, stream_tag);
}

}  // namespace detail

// Fills in derived seeds and defaults so the returned config reproduces the
// run exactly when fed back in.
inline FlatConfig resolve_config(FlatConfig cfg) {
  cfg.set("data.seed", format_int(static_cast<std::int64_t>(detail::resolved_seed(cfg, "data.seed", 1))));
  cfg.set("model.seed", format_int(static_cast<std::int64_t>(detail::resolved_seed(cfg, "model.seed", 2))));
  cfg.set("train.seed", format_int(static_cast<std::int64_t>(detail::resolved_seed(cfg, "train.seed", 3))));
  cfg.set("generate.seed",
          format_int(static_cast<std::int64_t>(detail::resolved_seed(cfg, "generate.seed", 4))));
  return cfg;
}

namespace detail {

inline std::filesystem::path output_dir(const FlatConfig& cfg) {
  auto dir = cfg.get_string("out.dir", "");
  if (dir.empty()) throw std::invalid_argument("missing config key: out.dir");
  std::filesystem::create_directories(dir);
  return dir;
}

inline PointCloud load_data(const FlatConfig& cfg) {
  auto sampler = cfg.get_string("data.sampler", "");
  if (sampler.empty())
    throw std::invalid_argument("missing config key: data.sampler (circle|torus3|rp2|csv)");
  auto count = cfg.get_int("data.count", 1000);
  if (count < 1) throw std::invalid_argument("config key data.count must be >= 1");
  auto seed = static_cast<std::uint64_t>(cfg.get_int("data.seed", 1));

  PointCloud cloud;
  if (sampler == "circle") {
    cloud = sample_circle(count, seed);
  } else if (sampler == "torus3") {
    cloud = sample_torus3(count, seed);
  } else if (sampler == "rp2") {
    cloud = sample_rp2(count, seed);
  } else if (sampler == "csv") {
    auto path = cfg.get_string("data.csv", "");
    if (path.empty()) throw std::invalid_argument("missing config key: data.csv");
    if (!std::filesystem::exists(path))
      throw std::invalid_argument("data.csv path does not exist: " + path);
    cloud = read_cloud_csv(path);
  } else {
    throw std::invalid_argument("config key data.sampler: unknown value '" + sampler + "'");
  }
  return cloud;
}

inline AtlasConfig atlas_config_from(const FlatConfig& cfg, Eigen::Index data_dims) {
  AtlasConfig out;
  out.ambient_dim = static_cast<int>(cfg.get_int("model.ambient_dim", data_dims));
  if (out.ambient_dim != data_dims)
    throw std::invalid_argument("config key model.ambient_dim (" +
                                format_int(out.ambient_dim) + ") does not match data dimension " +
                                format_int(data_dims));
  out.latent_dim = static_cast<int>(cfg.get_int("model.latent_dim", 1));
  out.chart_count = static_cast<int>(cfg.get_int("model.chart_count", 1));
  out.encoder_kind = encoder_kind_from_name(cfg.get_string("model.encoder", "linear"));
  out.encoder_hidden = cfg.get_int_list("model.hidden.encoder", {16});
  out.decoder_hidden = cfg.get_int_list("model.hidden.decoder", {16, 16});
  out.membership_hidden = cfg.get_int_list("model.hidden.membership", {16});
  out.membership_hidden_activation =
      activation_from_name(cfg.get_string("model.membership_hidden_activation", "relu"));
  out.discriminator_hidden = cfg.get_int_list("model.hidden.discriminator", {16, 16});
  out.shared_trunk = cfg.get_bool("model.shared_trunk", false);
  out.seed = static_cast<std::uint64_t>(cfg.get_int("model.seed", 1));
  out.validate();
  return out;
}

inline LossConfig loss_config_from(const FlatConfig& cfg) {
  LossConfig out;
  out.batch_size = static_cast<int>(cfg.get_int("train.batch_size", 128));
  out.learning_rate = cfg.get_double("train.learning_rate", 1e-3);
  out.epochs = static_cast<int>(cfg.get_int("train.epochs", 100));
  out.rmsprop_decay = cfg.get_double("train.rmsprop_decay", 0.9);
  out.rmsprop_epsilon = cfg.get_double("train.rmsprop_epsilon", 1e-8);
  out.discriminator_steps = static_cast<int>(cfg.get_int("train.disc_steps", 1));
  out.generator_steps = static_cast<int>(cfg.get_int("train.gen_steps", 1));
  out.validate();
  return out;
}

inline void write_manifest(const std::filesystem::path& dir, const std::string& command,
                           const FlatConfig& cfg, double wall_seconds) {
  std::string out = "# atlasnerve run manifest\n";
  out += "command=" + command + "\n";
  out += "wall_time_seconds=" + format_double(wall_seconds) + "\n";
  out += cfg.serialize();
  write_text_file(dir / "manifest.txt", out);
}

class WallClock {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

}  // namespace detail

// Train a model on the configured dataset; writes model.txt, loss.csv, and
// manifest.txt under out.dir. With train.init set, training resumes from the
// given model file instead of a fresh initialization (the optimizer's running
// means still start at zero, so a resumed run is not bit-equivalent to one
// longer run).
inline void cmd_fit(const FlatConfig& raw) {
  detail::WallClock clock;
  FlatConfig cfg = resolve_config(raw);
  auto dir = detail::output_dir(cfg);

  PointCloud cloud = detail::load_data(cfg);

  AtlasModel model;
  if (cfg.has("train.init")) {
    model = load_atlas(cfg.get_string("train.init", ""));
    if (model.config.ambient_dim != cloud.dims())
      throw std::invalid_argument("train.init model expects dimension " +
                                  format_int(model.config.ambient_dim) + ", data has " +
                                  format_int(cloud.dims()));
    // Continue in the model's own coordinates.
    if (model.scaling && !cloud.scaling) {
      for (Eigen::Index i = 0; i < cloud.count(); ++i)
        cloud.points.row(i) = model.scaling->apply(cloud.points.row(i).transpose()).transpose();
      cloud.scaling = model.scaling;
    }
  } else {
    if (cfg.get_bool("data.rescale", true) && !cloud.scaling) cloud = rescale(cloud);
    model = make_atlas(detail::atlas_config_from(cfg, cloud.dims()));
    model.scaling = cloud.scaling;
  }

  LossConfig loss_cfg = detail::loss_config_from(cfg);
  Rng rng(static_cast<std::uint64_t>(cfg.get_int("train.seed", 1)));
  LossHistory history = fit(model, cloud, loss_cfg, rng);

  save_atlas(dir / "model.txt", model);
  write_text_file(dir / "loss.csv", history.to_csv());
  detail::write_manifest(dir, "fit", cfg, clock.seconds());
}

namespace detail {

inline MembershipMatrix load_membership(const FlatConfig& cfg) {
  if (cfg.has("nerve.membership_csv")) {
    auto path = cfg.get_string("nerve.membership_csv", "");
    if (!std::filesystem::exists(path))
      throw std::invalid_argument("nerve.membership_csv path does not exist: " + path);
    MembershipMatrix m;
    m.values = parse_cloud_csv(read_text_file(path)).points;
    m.validate(1e-3);  // CSV input tolerance
    return m;
  }
  auto model_path = cfg.get_string("nerve.model", "");
  if (model_path.empty())
    throw std::invalid_argument("nerve needs either nerve.model or nerve.membership_csv");
  if (!std::filesystem::exists(model_path))
    throw std::invalid_argument("nerve.model path does not exist: " + model_path);
  AtlasModel model = load_atlas(model_path);
  PointCloud cloud = load_data(cfg);
  MembershipMatrix m = membership_matrix(model, cloud);
  m.validate(1e-6);
  return m;
}

inline int nerve_max_dimension(const FlatConfig& cfg) {
  if (cfg.has("nerve.max_dim")) return static_cast<int>(cfg.get_int("nerve.max_dim", 3));
  if (cfg.has("nerve.model") && std::filesystem::exists(cfg.get_string("nerve.model", ""))) {
    AtlasModel model = load_atlas(cfg.get_string("nerve.model", ""));
    return model.config.latent_dim + 1;
  }
  return 3;
}

inline OverlapMethod nerve_method(const FlatConfig& cfg) {
  auto value = cfg.get_int("nerve.method", 1);
  if (value == 1) return OverlapMethod::witness;
  if (value == 2) return OverlapMethod::expected;
  throw std::invalid_argument("config key nerve.method must be 1 or 2");
}

inline std::vector<double> epsilon_grid_from(const FlatConfig& cfg) {
  return geometric_grid(cfg.get_double("nerve.grid.start", 1e-6),
                        cfg.get_double("nerve.grid.stop", 0.5),
                        static_cast<int>(cfg.get_int("nerve.grid.count", 40)));
}

}  // namespace detail

// Nerve + homology of a fitted model (or a raw membership CSV). With
// nerve.epsilon set, builds one complex and writes simplices.txt plus
// homology.csv/homology.txt; otherwise sweeps the epsilon grid into
// barcode.csv with per-epsilon simplex sections in simplices.txt. Both modes
// write the pairwise-overlap one-skeleton to edges.csv.
inline void cmd_nerve(const FlatConfig& raw) {
  detail::WallClock clock;
  FlatConfig cfg = resolve_config(raw);
  auto dir = detail::output_dir(cfg);

  MembershipMatrix m = detail::load_membership(cfg);
  OverlapMethod method = detail::nerve_method(cfg);
  int max_dim = detail::nerve_max_dimension(cfg);

  // One-skeleton weights (symmetric pairwise overlap) over populated charts.
  std::vector<int> populated;
  for (int j = 1; j <= m.charts(); ++j)
    if (m.values.col(j - 1).sum() > 0.0) populated.push_back(j);
  OverlapScores scores = pairwise_scores(m, populated);
  if (scores.clamp_events > 0)
    std::fprintf(stderr, "warning: clamped %ld overlap scores into [0,1]\n", scores.clamp_events);
  double top_fraction = cfg.get_double("export.top_fraction", 1.0 / 3.0);
  write_text_file(dir / "edges.csv", edges_to_csv(export_one_skeleton(scores, top_fraction)));

  if (cfg.has("nerve.epsilon")) {
    NerveConfig nerve_cfg{method, cfg.get_double("nerve.epsilon", 0.1), max_dim};
    SimplicialComplex complex = build_nerve(m, nerve_cfg);
    write_text_file(dir / "simplices.txt", complex.to_text());
    HomologyReport report = homology_groups(complex, std::max(1, complex.dimension()));
    write_text_file(dir / "homology.csv", report.to_csv());
    write_text_file(dir / "homology.txt", report.to_text());
  } else {
    auto grid = detail::epsilon_grid_from(cfg);
    auto rows = epsilon_sweep(m, method, grid, max_dim);
    write_text_file(dir / "barcode.csv", sweep_to_csv(rows));
    std::string sections;
    for (const auto& row : rows) {
      sections += "# epsilon=" + format_double(row.epsilon) +
                  " log_epsilon=" + format_double(std::log(row.epsilon)) + "\n";
      sections += row.complex.to_text();
    }
    write_text_file(dir / "simplices.txt", sections);
  }
  detail::write_manifest(dir, "nerve", cfg, clock.seconds());
}

// Sample the prior through the decoders; writes generated.csv with one row
// per sample (chart label then ambient coordinates, original units).
inline void cmd_generate(const FlatConfig& raw) {
  detail::WallClock clock;
  FlatConfig cfg = resolve_config(raw);
  auto dir = detail::output_dir(cfg);

  auto model_path = cfg.get_string("generate.model", "");
  if (model_path.empty()) throw std::invalid_argument("missing config key: generate.model");
  AtlasModel model = load_atlas(model_path);

  auto count = cfg.get_int("generate.count", 1000);
  if (count < 0) throw std::invalid_argument("config key generate.count must be >= 0");
  auto seed = static_cast<std::uint64_t>(cfg.get_int("generate.seed", 1));

  std::vector<std::string> header{"chart"};
  for (int c = 0; c < model.config.ambient_dim; ++c) header.push_back("x" + format_int(c));
  CsvBuilder csv(header);
  for (const auto& sample : generate(model, seed, count)) {
    std::vector<std::string> row{format_int(sample.chart)};
    for (Eigen::Index c = 0; c < sample.point.size(); ++c)
      row.push_back(format_double(sample.point(c)));
    csv.row(row);
  }
  write_text_file(dir / "generated.csv", csv.str());
  detail::write_manifest(dir, "generate", cfg, clock.seconds());
}

// Per-point reconstructions: input coordinates, the argmax chart, that
// chart's round trip (original units), and the membership-weighted squared
// error in model coordinates (the quantity training averages).
inline void cmd_reconstruct(const FlatConfig& raw) {
  detail::WallClock clock;
  FlatConfig cfg = resolve_config(raw);
  auto dir = detail::output_dir(cfg);

  auto model_path = cfg.get_string("reconstruct.model", "");
  if (model_path.empty()) throw std::invalid_argument("missing config key: reconstruct.model");
  AtlasModel model = load_atlas(model_path);
  PointCloud cloud = detail::load_data(cfg);
  if (cloud.dims() != model.config.ambient_dim)
    throw std::invalid_argument("data dimension " + format_int(cloud.dims()) +
                                " does not match model ambient dimension " +
                                format_int(model.config.ambient_dim));

  std::vector<std::string> header;
  for (int c = 0; c < model.config.ambient_dim; ++c) header.push_back("x" + format_int(c));
  header.push_back("chart");
  for (int c = 0; c < model.config.ambient_dim; ++c) header.push_back("rec" + format_int(c));
  header.push_back("weighted_error");

  CsvBuilder csv(header);
  for (Eigen::Index i = 0; i < cloud.count(); ++i) {
    Eigen::VectorXd x = cloud.points.row(i).transpose();
    Reconstruction rec = reconstruct(model, x);
    Eigen::Index best = 0;
    rec.weights.maxCoeff(&best);
    std::vector<std::string> row;
    for (Eigen::Index c = 0; c < x.size(); ++c) row.push_back(format_double(x(c)));
    row.push_back(format_int(best + 1));
    const Eigen::VectorXd& chart_point = rec.per_chart[static_cast<std::size_t>(best)];
    for (Eigen::Index c = 0; c < chart_point.size(); ++c)
      row.push_back(format_double(chart_point(c)));
    row.push_back(format_double(rec.weighted_error));
    csv.row(row);
  }
  write_text_file(dir / "reconstructions.csv", csv.str());
  detail::write_manifest(dir, "reconstruct", cfg, clock.seconds());
}

// One training run per latent dimension: loss_d<d>.csv per run plus
// summary.csv with final losses and their gaps to log 2 / log 4.
inline void cmd_dim_sweep(const FlatConfig& raw) {
  detail::WallClock clock;
  FlatConfig cfg = resolve_config(raw);
  auto dir = detail::output_dir(cfg);

  auto d_list = cfg.get_int_list("dim_sweep.d_list", {});
  if (d_list.empty()) throw std::invalid_argument("missing config key: dim_sweep.d_list");

  PointCloud cloud = detail::load_data(cfg);
  if (cfg.get_bool("data.rescale", true) && !cloud.scaling) cloud = rescale(cloud);

  AtlasConfig base = detail::atlas_config_from(cfg, cloud.dims());
  LossConfig loss_cfg = detail::loss_config_from(cfg);
  auto train_seed = static_cast<std::uint64_t>(cfg.get_int("train.seed", 1));

  auto result = dimension_sweep(cloud, d_list, base, loss_cfg, train_seed);

  CsvBuilder summary(
      {"d", "final_recon", "final_gen", "final_disc", "gen_gap_log2", "disc_gap_log4"});
  for (const auto& [d, history] : result) {
    write_text_file(dir / ("loss_d" + format_int(d) + ".csv"), history.to_csv());
    double final_recon = history.reconstruction.empty() ? 0.0 : history.reconstruction.back();
    double final_disc = history.discriminator.empty() ? 0.0 : history.discriminator.back();
    double final_gen = history.generator.empty() ? 0.0 : history.generator.back();
    summary.row({format_int(d), format_double(final_recon), format_double(final_gen),
                 format_double(final_disc), format_double(final_gen - std::log(2.0)),
                 format_double(final_disc - std::log(4.0))});
  }
  write_text_file(dir / "summary.csv", summary.str());
  detail::write_manifest(dir, "dim-sweep", cfg, clock.seconds());
}

}  // namespace atlasnerve
