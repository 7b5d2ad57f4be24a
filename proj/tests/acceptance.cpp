// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Criteria can be selected by number on the command line, e.g.
//   acceptance_tests 1 2 6 7
// Training-based criteria allow several seeds and pass on a quorum, since
// adversarial training does not converge from every initialization.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "atlasnerve/commands.hpp"
#include "atlasnerve/trainer.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace atlasnerve;

namespace {

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

fs::path fresh_dir(const std::string& leaf) {
  fs::path dir = fs::temp_directory_path() / "atlasnerve_acceptance" / leaf;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

double median(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  return values[values.size() / 2];
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& line : split(read_text_file(path), '\n')) {
    if (trim(line).empty()) continue;
    rows.push_back(split(std::string(trim(line)), ','));
  }
  return rows;
}

// --------------------------------------------------------------------------
// Criterion 1: analytic gradients of all three losses vs central finite
// differences on n=3, d=2, k=2, batch 4, within 1e-4 relative error, < 10 s.

bool criterion_gradients(std::string& detail) {
  Timer timer;
  std::size_t checked = 0, failed = 0;

  for (auto kind : {EncoderKind::linear, EncoderKind::mlp}) {
    AtlasConfig cfg;
    cfg.ambient_dim = 3;
    cfg.latent_dim = 2;
    cfg.chart_count = 2;
    cfg.encoder_kind = kind;
    cfg.encoder_hidden = {6};
    cfg.decoder_hidden = {6};
    cfg.membership_hidden = {6};
    cfg.discriminator_hidden = {6};
    cfg.seed = 2024;
    AtlasModel model = make_atlas(cfg);

    Rng rng(99);
    Eigen::MatrixXd batch(3, 4);
    for (int c = 0; c < 4; ++c)
      for (int r = 0; r < 3; ++r) batch(r, c) = rng.uniform(-0.8, 0.8);
    auto prior = sample_prior(model.prior(), 4, rng);

    auto compare = [&](Mlp& net, const MlpGradients& analytic,
                       const std::function<double()>& loss) {
      auto numeric = oracles::finite_difference(net, loss, 1e-5);
      auto flat = oracles::flatten(analytic);
      for (std::size_t i = 0; i < flat.size(); ++i) {
        ++checked;
        if (!oracles::gradient_close(flat[i], numeric[i])) ++failed;
      }
    };

    AtlasGradients recon;
    reconstruction_gradients(model, batch, recon);
    auto recon_loss = [&] { return reconstruction_loss(model, batch); };
    for (std::size_t j = 0; j < 2; ++j) {
      compare(model.encoders[j], recon.encoders[j], recon_loss);
      compare(model.decoders[j], recon.decoders[j], recon_loss);
    }
    compare(model.membership_net, *recon.membership, recon_loss);

    AtlasGradients disc;
    discriminator_gradients(model, batch, prior, disc);
    auto disc_loss = [&] { return discriminator_loss(model, batch, prior); };
    for (std::size_t j = 0; j < 2; ++j)
      compare(model.discriminators[j], disc.discriminators[j], disc_loss);

    AtlasGradients gen;
    generator_gradients(model, batch, gen);
    auto gen_loss = [&] { return generator_loss(model, batch); };
    for (std::size_t j = 0; j < 2; ++j) compare(model.encoders[j], gen.encoders[j], gen_loss);
    compare(model.membership_net, *gen.membership, gen_loss);
  }

  double elapsed = timer.seconds();
  detail = format_int(static_cast<std::int64_t>(checked)) + " parameters checked, " +
           format_int(static_cast<std::int64_t>(failed)) + " mismatches, " + fmt(elapsed) + " s";
  return failed == 0 && elapsed < 10.0;
}

// --------------------------------------------------------------------------
// Criterion 2: a blind discriminator (output 1/2 everywhere) gives losses
// log 4 and log 2 within 1e-9.

bool criterion_baselines(std::string& detail) {
  AtlasConfig cfg;
  cfg.ambient_dim = 3;
  cfg.latent_dim = 2;
  cfg.chart_count = 3;
  cfg.encoder_kind = EncoderKind::linear;
  cfg.seed = 5;
  AtlasModel model = make_atlas(cfg);
  for (auto& disc : model.discriminators)
    visit_params(disc, [](double& p) { p = 0.0; });

  Rng rng(7);
  Eigen::MatrixXd batch(3, 32);
  for (int c = 0; c < 32; ++c)
    for (int r = 0; r < 3; ++r) batch(r, c) = rng.uniform(-0.9, 0.9);
  auto prior = sample_prior(model.prior(), 32, rng);

  double disc_gap = std::abs(discriminator_loss(model, batch, prior) - std::log(4.0));
  double gen_gap = std::abs(generator_loss(model, batch) - std::log(2.0));
  detail = "|disc - log4| = " + fmt(disc_gap) + ", |gen - log2| = " + fmt(gen_gap);
  return disc_gap < 1e-9 && gen_gap < 1e-9;
}

// --------------------------------------------------------------------------
// Criterion 3: circle preset reaches the circle regime (H0 = Z, H1 = Z under
// the witness method) somewhere on the default grid; >= 3 of up to 5 seeds,
// <= 5 minutes each.

bool seed_reaches(const std::string& preset, std::uint64_t seed, int method,
                  const std::function<bool(const std::vector<std::string>&)>& row_ok,
                  const fs::path& dir) {
  FlatConfig cfg = preset_config(preset);
  cfg.set("seed", format_int(static_cast<std::int64_t>(seed)));
  cfg.set("out.dir", (dir / ("fit_s" + format_int(static_cast<std::int64_t>(seed)))).string());
  cmd_fit(cfg);

  FlatConfig nerve_cfg = cfg;
  nerve_cfg.set("nerve.model", cfg.get_string("out.dir", "") + "/model.txt");
  nerve_cfg.set("nerve.method", format_int(method));
  nerve_cfg.set("out.dir", (dir / ("nerve_s" + format_int(static_cast<std::int64_t>(seed)) + "_m" +
                                   format_int(method)))
                               .string());
  cmd_nerve(nerve_cfg);

  auto rows = read_csv(fs::path(nerve_cfg.get_string("out.dir", "")) / "barcode.csv");
  for (std::size_t i = 1; i < rows.size(); ++i)
    if (row_ok(rows[i])) return true;
  return false;
}

bool criterion_circle(std::string& detail) {
  auto dir = fresh_dir("circle");
  auto circle_row = [](const std::vector<std::string>& row) {
    return row[1] == "1" && row[2] == "1" && row[3].empty();
  };
  int successes = 0, attempts = 0;
  std::string runtimes;
  for (std::uint64_t seed = 1; seed <= 5 && successes < 3; ++seed) {
    Timer timer;
    ++attempts;
    bool ok = seed_reaches("circle", seed, 1, circle_row, dir);

    // The converged fit itself must reconstruct well.
    auto loss_rows = read_csv(dir / ("fit_s" + format_int(static_cast<std::int64_t>(seed))) /
                              "loss.csv");
    double final_recon = parse_double(loss_rows.back()[1]);
    if (final_recon >= 1e-2) ok = false;

    double elapsed = timer.seconds();
    runtimes += (runtimes.empty() ? "" : " ") + fmt(elapsed) + "s";
    if (elapsed > 300.0) {
      detail = "seed exceeded the 5 minute budget (" + fmt(elapsed) + " s)";
      return false;
    }
    if (ok) ++successes;
  }
  detail = format_int(successes) + "/" + format_int(attempts) +
           " seeds reached H0=Z, H1=Z with recon < 1e-2 (need 3); runtimes " + runtimes;
  return successes >= 3;
}

// --------------------------------------------------------------------------
// Criterion 4: projective-plane preset shows an interval with H1 = Z/2
// (betti 0, torsion [2]) under at least one method; >= 2 of up to 5 seeds,
// <= 30 minutes each.

bool criterion_projective_plane(std::string& detail) {
  auto dir = fresh_dir("rp2");
  auto torsion_row = [](const std::vector<std::string>& row) {
    return row[2] == "0" && row[3] == "2";
  };
  int successes = 0, attempts = 0;
  std::string notes;
  for (std::uint64_t seed = 1; seed <= 5 && successes < 2; ++seed) {
    Timer timer;
    ++attempts;
    FlatConfig cfg = preset_config("rp2");
    cfg.set("seed", format_int(static_cast<std::int64_t>(seed)));
    cfg.set("out.dir", (dir / ("fit_s" + format_int(static_cast<std::int64_t>(seed)))).string());
    cmd_fit(cfg);

    bool ok = false;
    for (int method : {1, 2}) {
      FlatConfig nerve_cfg = cfg;
      nerve_cfg.set("nerve.model", cfg.get_string("out.dir", "") + "/model.txt");
      nerve_cfg.set("nerve.method", format_int(method));
      // Read the overlaps on a denser evaluation cloud than the training
      // sample and on a finer grid, so narrow windows are not missed.
      nerve_cfg.set("data.count", "60000");
      nerve_cfg.set("nerve.grid.start", "1e-7");
      nerve_cfg.set("nerve.grid.count", "160");
      nerve_cfg.set("out.dir",
                    (dir / ("nerve_s" + format_int(static_cast<std::int64_t>(seed)) + "_m" +
                            format_int(method)))
                        .string());
      cmd_nerve(nerve_cfg);
      auto rows = read_csv(fs::path(nerve_cfg.get_string("out.dir", "")) / "barcode.csv");
      int span = 0;
      for (std::size_t i = 1; i < rows.size(); ++i)
        if (torsion_row(rows[i])) ++span;
      if (span > 0) {
        ok = true;
        notes += " s" + format_int(static_cast<std::int64_t>(seed)) + ":m" +
                 format_int(method) + "x" + format_int(span);
      }
    }
    double elapsed = timer.seconds();
    if (elapsed > 1800.0) {
      detail = "seed exceeded the 30 minute budget (" + fmt(elapsed) + " s)";
      return false;
    }
    if (ok) ++successes;
  }
  detail = format_int(successes) + "/" + format_int(attempts) +
           " seeds show a Z/2 interval (need 2);" + (notes.empty() ? " none" : notes);
  return successes >= 2;
}

// --------------------------------------------------------------------------
// Criterion 5: torus dimension sweep emits all CSVs; median final
// reconstruction over 3 seeds is lower at d=3 than at d=1. Gaps to log 2 /
// log 4 are reported, not asserted. <= 30 minutes total.

bool criterion_dimension_sweep(std::string& detail) {
  Timer timer;
  auto dir = fresh_dir("torus3");
  std::vector<double> final_d1, final_d3;
  std::string gap_note;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    FlatConfig cfg = preset_config("torus3");
    cfg.set("seed", format_int(static_cast<std::int64_t>(seed)));
    auto out = dir / ("sweep_s" + format_int(static_cast<std::int64_t>(seed)));
    cfg.set("out.dir", out.string());
    cmd_dim_sweep(cfg);

    for (int d = 1; d <= 5; ++d)
      if (!fs::exists(out / ("loss_d" + format_int(d) + ".csv"))) {
        detail = "missing loss_d" + format_int(d) + ".csv for seed " +
                 format_int(static_cast<std::int64_t>(seed));
        return false;
      }
    auto summary = read_csv(out / "summary.csv");
    if (summary.size() != 6) {
      detail = "summary.csv should have 5 data rows";
      return false;
    }
    for (std::size_t i = 1; i < summary.size(); ++i) {
      if (summary[i][0] == "1") final_d1.push_back(parse_double(summary[i][1]));
      if (summary[i][0] == "3") final_d3.push_back(parse_double(summary[i][1]));
      if (seed == 1 && (summary[i][0] == "3" || summary[i][0] == "5"))
        gap_note += " d" + summary[i][0] + ":gen_gap=" + fmt(parse_double(summary[i][4])) +
                    ",disc_gap=" + fmt(parse_double(summary[i][5]));
    }
  }
  double elapsed = timer.seconds();
  double med1 = median(final_d1), med3 = median(final_d3);
  detail = "median final recon d=1: " + fmt(med1) + ", d=3: " + fmt(med3) +
           "; reported (not asserted):" + gap_note + "; " + fmt(elapsed) + " s";
  return med3 < med1 && elapsed < 1800.0;
}

// --------------------------------------------------------------------------
// Criterion 6: integer pipeline matches exact rational elimination on 200
// random downward-closed complexes (<= 12 vertices, dim <= 3), and
// boundary-of-boundary vanishes; < 60 s.

bool criterion_homology_oracle(std::string& detail) {
  Timer timer;
  Rng rng(20240815);
  int checked = 0;
  for (int trial = 0; trial < 200; ++trial) {
    SimplicialComplex complex = oracles::random_complex(rng, 12, 3);
    int top = std::max(0, complex.dimension());

    for (int ell = 2; ell <= top; ++ell) {
      IntMatrix lower = boundary_matrix(complex, ell - 1);
      IntMatrix upper = boundary_matrix(complex, ell);
      for (std::size_t i = 0; i < lower.rows; ++i)
        for (std::size_t j = 0; j < upper.cols; ++j) {
          std::int64_t dot = 0;
          for (std::size_t m = 0; m < lower.cols; ++m) dot += lower.at(i, m) * upper.at(m, j);
          if (dot != 0) {
            detail = "boundary composition nonzero on trial " + format_int(trial);
            return false;
          }
        }
    }

    auto report = homology_groups(complex, top);
    auto expected = oracles::rational_betti(complex, top);
    for (int ell = 0; ell <= top; ++ell) {
      if (report.at(ell).betti != expected[static_cast<std::size_t>(ell)]) {
        detail = "betti mismatch in degree " + format_int(ell) + " on trial " + format_int(trial);
        return false;
      }
    }
    ++checked;
  }
  double elapsed = timer.seconds();
  detail = format_int(checked) + " complexes agree with rational elimination, " + fmt(elapsed) +
           " s";
  return elapsed < 60.0;
}

// --------------------------------------------------------------------------
// Criterion 7: the 6-vertex triangulation of the projective plane.

bool criterion_projective_triangulation(std::string& detail) {
  SimplicialComplex complex;
  const std::vector<Simplex> faces = {{1, 2, 5}, {1, 2, 6}, {1, 3, 4}, {1, 3, 6}, {1, 4, 5},
                                      {2, 3, 4}, {2, 3, 5}, {2, 4, 6}, {3, 5, 6}, {4, 5, 6}};
  for (const auto& f : faces) complex.insert_closed(f);
  auto report = homology_groups(complex, 2);
  detail = "H_0 = " + report.at(0).describe() + ", H_1 = " + report.at(1).describe() +
           ", H_2 = " + report.at(2).describe();
  return report.at(0).betti == 1 && report.at(0).torsion.empty() && report.at(1).betti == 0 &&
         report.at(1).torsion == std::vector<std::int64_t>{2} && report.at(2).trivial();
}

// --------------------------------------------------------------------------
// Criterion 8: overlap measures match the naive loops to 1e-12 on random
// membership matrices (N <= 100, k <= 6); witness nerve monotone in epsilon
// on 100 random matrices.

MembershipMatrix random_membership(Rng& rng, int n, int k) {
  MembershipMatrix m;
  m.values.resize(n, k);
  for (int i = 0; i < n; ++i) {
    double sum = 0.0;
    for (int j = 0; j < k; ++j) {
      double v = rng.uniform(0.005, 1.0);
      m.values(i, j) = v;
      sum += v;
    }
    m.values.row(i) /= sum;
  }
  return m;
}

bool criterion_overlap_oracles(std::string& detail) {
  Rng rng(777);
  double worst = 0.0;
  for (int trial = 0; trial < 30; ++trial) {
    int n = 10 + static_cast<int>(rng.below(91));   // <= 100
    int k = 3 + static_cast<int>(rng.below(4));     // <= 6
    MembershipMatrix m = random_membership(rng, n, k);
    for (int a = 1; a <= k; ++a)
      for (int b = a + 1; b <= k; ++b) {
        double diff =
            std::abs(overlap_pair(m, a, b) - oracles::naive_overlap_pair(m.values, a - 1, b - 1));
        worst = std::max(worst, diff);
        for (int c = b + 1; c <= k; ++c) {
          double diff3 = std::abs(overlap_tuple(m, {a, b, c}) -
                                  oracles::naive_overlap_tuple(m.values, {a - 1, b - 1, c - 1}));
          worst = std::max(worst, diff3);
        }
      }
  }
  if (worst > 1e-12) {
    detail = "overlap mismatch up to " + fmt(worst);
    return false;
  }

  int violations = 0;
  for (int trial = 0; trial < 100; ++trial) {
    MembershipMatrix m = random_membership(rng, 40, 5);
    double e1 = rng.uniform(0.01, 0.3);
    double e2 = e1 + rng.uniform(0.0, 0.4);
    auto big = build_nerve(m, {OverlapMethod::witness, e1, 3});
    auto small = build_nerve(m, {OverlapMethod::witness, e2, 3});
    for (int d = 0; d <= small.dimension(); ++d)
      for (const auto& s : small.simplices(d))
        if (!big.contains(s)) ++violations;
  }
  detail = "naive-loop agreement within 1e-12 (worst " + fmt(worst) + "); " +
           format_int(violations) + " monotonicity violations in 100 sweeps";
  return violations == 0;
}

// --------------------------------------------------------------------------
// Criterion 9: identical config + seed reproduces byte-identical CSVs for
// every command.

bool criterion_reproducibility(std::string& detail) {
  auto dir = fresh_dir("repro");
  std::vector<std::string> mismatches;

  auto compare = [&](const fs::path& a, const fs::path& b, const std::string& leaf) {
    if (read_text_file(a / leaf) != read_text_file(b / leaf)) mismatches.push_back(leaf);
  };

  FlatConfig fit_cfg = preset_config("circle");
  fit_cfg.set("data.count", "256");
  fit_cfg.set("train.epochs", "10");
  fit_cfg.set("seed", "42");
  for (const char* leaf : {"f1", "f2"}) {
    FlatConfig cfg = fit_cfg;
    cfg.set("out.dir", (dir / leaf).string());
    cmd_fit(cfg);
  }
  compare(dir / "f1", dir / "f2", "loss.csv");
  compare(dir / "f1", dir / "f2", "model.txt");

  for (const char* leaf : {"n1", "n2"}) {
    FlatConfig cfg = fit_cfg;
    cfg.set("nerve.model", (dir / "f1" / "model.txt").string());
    cfg.set("out.dir", (dir / leaf).string());
    cmd_nerve(cfg);
  }
  compare(dir / "n1", dir / "n2", "barcode.csv");
  compare(dir / "n1", dir / "n2", "edges.csv");
  compare(dir / "n1", dir / "n2", "simplices.txt");

  for (const char* leaf : {"g1", "g2"}) {
    FlatConfig cfg;
    cfg.set("generate.model", (dir / "f1" / "model.txt").string());
    cfg.set("generate.count", "200");
    cfg.set("seed", "42");
    cfg.set("out.dir", (dir / leaf).string());
    cmd_generate(cfg);
  }
  compare(dir / "g1", dir / "g2", "generated.csv");

  for (const char* leaf : {"r1", "r2"}) {
    FlatConfig cfg = fit_cfg;
    cfg.set("reconstruct.model", (dir / "f1" / "model.txt").string());
    cfg.set("out.dir", (dir / leaf).string());
    cmd_reconstruct(cfg);
  }
  compare(dir / "r1", dir / "r2", "reconstructions.csv");

  FlatConfig sweep_cfg = preset_config("torus3");
  sweep_cfg.set("data.count", "256");
  sweep_cfg.set("train.epochs", "3");
  sweep_cfg.set("dim_sweep.d_list", "1,2");
  sweep_cfg.set("seed", "42");
  for (const char* leaf : {"s1", "s2"}) {
    FlatConfig cfg = sweep_cfg;
    cfg.set("out.dir", (dir / leaf).string());
    cmd_dim_sweep(cfg);
  }
  compare(dir / "s1", dir / "s2", "summary.csv");
  compare(dir / "s1", dir / "s2", "loss_d1.csv");
  compare(dir / "s1", dir / "s2", "loss_d2.csv");

  if (!mismatches.empty()) {
    detail = "non-identical outputs:";
    for (const auto& leaf : mismatches) detail += " " + leaf;
    return false;
  }
  detail = "fit, nerve, generate, reconstruct, dim-sweep all byte-identical on re-run";
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  struct Criterion {
    int id;
    std::string name;
    std::function<bool(std::string&)> run;
  };
  std::vector<Criterion> criteria = {
      {1, "gradient correctness", criterion_gradients},
      {2, "loss baselines log4/log2", criterion_baselines},
      {3, "circle topology", criterion_circle},
      {4, "projective-plane torsion", criterion_projective_plane},
      {5, "torus dimension sweep", criterion_dimension_sweep},
      {6, "homology oracle equivalence", criterion_homology_oracle},
      {7, "projective-plane triangulation", criterion_projective_triangulation},
      {8, "overlap oracles and monotonicity", criterion_overlap_oracles},
      {9, "byte-identical reproducibility", criterion_reproducibility},
  };

  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failures = 0;
  for (auto& criterion : criteria) {
    if (!selected.empty() && !selected.count(criterion.id)) continue;
    Timer timer;
    std::string detail;
    bool ok = false;
    try {
      ok = criterion.run(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    std::printf("[%s] criterion %d: %s - %s (%.1f s)\n", ok ? "PASS" : "FAIL", criterion.id,
                criterion.name.c_str(), detail.c_str(), timer.seconds());
    std::fflush(stdout);
    if (!ok) ++failures;
  }
  return failures;
}
