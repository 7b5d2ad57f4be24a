#pragma once

// Nerve of a learned chart cover, read off the chart-membership matrix.
//
// Two inclusion tests are supported, both driven by a tolerance epsilon in
// (0,1):
//   witness  - charts overlap if a single sample row assigns all of them
//              membership above epsilon;
//   expected - charts overlap if the symmetric expected-membership measure
//              (pairwise, with its higher-order generalization) exceeds
//              epsilon.
// Higher-dimensional simplices are bootstrapped: a candidate subset is only
// tested once all of its facets were accepted, so the output is
// downward-closed by construction.

#include <Eigen/Dense>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "atlasnerve/homology.hpp"
#include "atlasnerve/io.hpp"

namespace atlasnerve {

// N x k row-stochastic matrix; row i is the membership distribution of
// sample i over the k charts.
struct MembershipMatrix {
  Eigen::MatrixXd values;

  Eigen::Index samples() const { return values.rows(); }
  int charts() const { return static_cast<int>(values.cols()); }

  // Rows must be nonnegative and sum to 1 within tol.
  void validate(double tol) const {
    for (Eigen::Index i = 0; i < values.rows(); ++i) {
      double sum = 0.0;
      for (Eigen::Index j = 0; j < values.cols(); ++j) {
        if (!(values(i, j) >= 0.0))
          throw std::invalid_argument("membership row " + format_int(i) +
                                      " has a negative or non-finite entry");
        sum += values(i, j);
      }
      if (std::abs(sum - 1.0) > tol)
        throw std::invalid_argument("membership row " + format_int(i) +
                                    " sums to " + format_double(sum) + ", not 1");
    }
  }
};

enum class OverlapMethod {
  witness = 1,   // thresholded co-membership of a single sample
  expected = 2,  // expected-membership overlap measure
};

struct NerveConfig {
  OverlapMethod method = OverlapMethod::witness;
  double epsilon = 0.1;   // in (0,1)
  int max_dimension = 3;  // highest simplex dimension to build

  void validate() const {
    if (!(epsilon > 0.0 && epsilon < 1.0))
      throw std::invalid_argument("nerve epsilon must lie in (0,1), got " + format_double(epsilon));
    if (max_dimension < 1) throw std::invalid_argument("nerve max_dimension must be >= 1");
  }
};

// Overlap measures for chart subsets (1-based chart ids, sorted keys).
// Only subsets reached by the bootstrap rule are present. Scores are clamped
// to [0,1]; clamp_events counts how often the clamp actually fired.
struct OverlapScores {
  std::map<std::vector<int>, double> scores;
  long clamp_events = 0;

  double at(const std::vector<int>& subset) const {
    auto key = normalized_simplex(subset);
    auto it = scores.find(key);
    if (it == scores.end()) throw std::invalid_argument("no score recorded for subset");
    return it->second;
  }
};

namespace detail {

inline void check_chart_index(const MembershipMatrix& m, int j) {
  if (j < 1 || j > m.charts())
    throw std::invalid_argument("chart index " + format_int(j) + " outside [1, " +
                                format_int(m.charts()) + "]");
}

inline double clamp_unit(double v, long* clamp_events) {
  if (v < 0.0) {
    if (clamp_events) ++*clamp_events;
    return 0.0;
  }
  if (v > 1.0) {
    if (clamp_events) ++*clamp_events;
    return 1.0;
  }
  return v;
}

}  // namespace detail

// Witness test: true iff some sample assigns membership > eps to every chart
// in the subset simultaneously.
inline bool overlap_witness(const MembershipMatrix& m, const std::vector<int>& subset,
                            double eps) {
  if (subset.empty()) throw std::invalid_argument("overlap_witness: empty subset");
  for (int j : subset) detail::check_chart_index(m, j);
  for (Eigen::Index i = 0; i < m.samples(); ++i) {
    bool all = true;
    for (int j : subset) {
      if (!(m.values(i, j - 1) > eps)) {
        all = false;
        break;
      }
    }
    if (all) return true;
  }
  return false;
}

// Symmetric pairwise overlap: the mean of the two column-normalized
// co-membership sums,
//   (1/2) (1/sum_i q(j0|x_i) + 1/sum_i q(j1|x_i)) * sum_i q(j0|x_i) q(j1|x_i).
inline double overlap_pair(const MembershipMatrix& m, int j0, int j1,
                           long* clamp_events = nullptr) {
  detail::check_chart_index(m, j0);
  detail::check_chart_index(m, j1);
  if (j0 == j1) throw std::invalid_argument("overlap_pair: chart indices must differ");
  double s0 = m.values.col(j0 - 1).sum();
  double s1 = m.values.col(j1 - 1).sum();
  if (s0 <= 0.0) throw std::invalid_argument("empty chart " + format_int(j0));
  if (s1 <= 0.0) throw std::invalid_argument("empty chart " + format_int(j1));
  double cross = m.values.col(j0 - 1).dot(m.values.col(j1 - 1));
  return detail::clamp_unit(0.5 * (1.0 / s0 + 1.0 / s1) * cross, clamp_events);
}

// Higher-order overlap of an (ell+1)-chart subset, ell >= 2: for each omitted
// chart, the full product sum normalized by the omitted product sum, averaged
// over the omitted index.
inline double overlap_tuple(const MembershipMatrix& m, const std::vector<int>& subset,
                            long* clamp_events = nullptr) {
  auto charts = normalized_simplex(subset);
  if (charts.size() < 3)
    throw std::invalid_argument("overlap_tuple needs at least 3 charts; use overlap_pair");
  for (int j : charts) detail::check_chart_index(m, j);

  Eigen::Index n = m.samples();
  Eigen::VectorXd full = Eigen::VectorXd::Ones(n);
  for (int j : charts) full = full.cwiseProduct(m.values.col(j - 1));
  double full_sum = full.sum();

  double total = 0.0;
  for (std::size_t omit = 0; omit < charts.size(); ++omit) {
    Eigen::VectorXd partial = Eigen::VectorXd::Ones(n);
    for (std::size_t r = 0; r < charts.size(); ++r)
      if (r != omit) partial = partial.cwiseProduct(m.values.col(charts[r] - 1));
    double denom = partial.sum();
    if (denom <= 0.0)
      throw std::invalid_argument("degenerate intersection: omitting chart " +
                                  format_int(charts[omit]) + " leaves an empty overlap");
    total += full_sum / denom;
  }
  return detail::clamp_unit(total / static_cast<double>(charts.size()), clamp_events);
}

// Pairwise scores between all given charts (used for one-skeleton export,
// regardless of which nerve method was used).
inline OverlapScores pairwise_scores(const MembershipMatrix& m, const std::vector<int>& charts) {
  OverlapScores out;
  for (std::size_t a = 0; a < charts.size(); ++a)
    for (std::size_t b = a + 1; b < charts.size(); ++b)
      out.scores[{charts[a], charts[b]}] =
          overlap_pair(m, charts[a], charts[b], &out.clamp_events);
  return out;
}

inline OverlapScores pairwise_scores(const MembershipMatrix& m) {
  std::vector<int> charts;
  for (int j = 1; j <= m.charts(); ++j) charts.push_back(j);
  return pairwise_scores(m, charts);
}

// Builds the nerve at one epsilon. Vertices: under the witness method chart j
// enters iff max_i q(j|x_i) > eps; under the expected method iff the column
// mean exceeds eps/k, so unused charts drop out while the rule degenerates
// gracefully as eps -> 0. Higher simplices follow the bootstrap rule.
inline SimplicialComplex build_nerve(const MembershipMatrix& m, const NerveConfig& cfg,
                                     OverlapScores* scores_out = nullptr) {
  cfg.validate();
  SimplicialComplex complex;
  OverlapScores scores;

  std::vector<int> vertices;
  for (int j = 1; j <= m.charts(); ++j) {
    bool present = false;
    if (cfg.method == OverlapMethod::witness) {
      present = m.values.col(j - 1).maxCoeff() > cfg.epsilon;
    } else {
      present = m.values.col(j - 1).mean() > cfg.epsilon / static_cast<double>(m.charts());
    }
    if (present) {
      vertices.push_back(j);
      complex.insert({j});
    }
  }

  // Dimension-by-dimension bootstrap: extend accepted simplices by one vertex
  // and test only candidates whose facets were all accepted.
  std::vector<Simplex> frontier;
  for (int v : vertices) frontier.push_back({v});
  for (int dim = 1; dim <= cfg.max_dimension && !frontier.empty(); ++dim) {
    std::vector<Simplex> next;
    for (const auto& base : frontier) {
      for (int v : vertices) {
        if (v <= base.back()) continue;
        Simplex candidate = base;
        candidate.push_back(v);
        bool facets_ok = true;
        for (std::size_t omit = 0; omit < candidate.size() && facets_ok; ++omit) {
          Simplex facet;
          for (std::size_t i = 0; i < candidate.size(); ++i)
            if (i != omit) facet.push_back(candidate[i]);
          facets_ok = complex.contains(facet);
        }
        if (!facets_ok) continue;

        bool accept = false;
        if (cfg.method == OverlapMethod::witness) {
          accept = overlap_witness(m, candidate, cfg.epsilon);
        } else {
          double u = candidate.size() == 2
                         ? overlap_pair(m, candidate[0], candidate[1], &scores.clamp_events)
                         : overlap_tuple(m, candidate, &scores.clamp_events);
          scores.scores[candidate] = u;
          accept = u > cfg.epsilon;
        }
        if (accept) {
          complex.insert(candidate);
          next.push_back(candidate);
        }
      }
    }
    frontier = std::move(next);
  }

  if (scores_out) *scores_out = std::move(scores);
  return complex;
}

inline std::vector<double> geometric_grid(double start, double stop, int count) {
  if (count < 1) throw std::invalid_argument("epsilon grid needs at least one point");
  if (!(start > 0.0) || !(stop > 0.0))
    throw std::invalid_argument("epsilon grid bounds must be positive");
  std::vector<double> grid;
  if (count == 1) {
    grid.push_back(start);
    return grid;
  }
  double log_start = std::log(start);
  double log_stop = std::log(stop);
  for (int i = 0; i < count; ++i) {
    double t = static_cast<double>(i) / static_cast<double>(count - 1);
    grid.push_back(std::exp(log_start + t * (log_stop - log_start)));
  }
  return grid;
}

// Default grid behind the barcode plots: 40 points, geometric in [1e-6, 0.5].
inline std::vector<double> default_epsilon_grid() { return geometric_grid(1e-6, 0.5, 40); }

struct SweepRow {
  double epsilon = 0.0;
  SimplicialComplex complex;
  HomologyReport homology;
};

// Nerve and homology at every epsilon of the grid.
inline std::vector<SweepRow> epsilon_sweep(const MembershipMatrix& m, OverlapMethod method,
                                           const std::vector<double>& grid, int max_dimension) {
  std::vector<SweepRow> rows;
  for (double eps : grid) {
    NerveConfig cfg{method, eps, max_dimension};
    SweepRow row;
    row.epsilon = eps;
    row.complex = build_nerve(m, cfg);
    int top = std::max(1, row.complex.dimension());
    row.homology = homology_groups(row.complex, top);
    rows.push_back(std::move(row));
  }
  return rows;
}

// Barcode-style table: log epsilon against the degree-0/1 groups.
inline std::string sweep_to_csv(const std::vector<SweepRow>& rows) {
  CsvBuilder csv({"log_epsilon", "betti_0", "betti_1", "torsion_1"});
  for (const auto& row : rows) {
    const auto& h0 = row.homology.at(0);
    const auto& h1 = row.homology.at(1);
    csv.row({format_double(std::log(row.epsilon)), format_int(h0.betti), format_int(h1.betti),
             HomologyReport::torsion_field(h1.torsion)});
  }
  return csv.str();
}

struct WeightedEdge {
  int j0 = 0;
  int j1 = 0;
  double weight = 0.0;
};

// Top fraction of positive-score edges, sorted by weight descending. Ties at
// the cutoff weight are all kept.
inline std::vector<WeightedEdge> export_one_skeleton(const OverlapScores& scores,
                                                     double top_fraction = 1.0 / 3.0) {
  if (!(top_fraction > 0.0 && top_fraction <= 1.0))
    throw std::invalid_argument("top_fraction must lie in (0,1]");
  std::vector<WeightedEdge> edges;
  for (const auto& [subset, score] : scores.scores) {
    if (subset.size() != 2 || score <= 0.0) continue;
    edges.push_back({subset[0], subset[1], score});
  }
  if (edges.empty()) return edges;

  std::sort(edges.begin(), edges.end(), [](const WeightedEdge& a, const WeightedEdge& b) {
    if (a.weight != b.weight) return a.weight > b.weight;
    if (a.j0 != b.j0) return a.j0 < b.j0;
    return a.j1 < b.j1;
  });
  auto keep = static_cast<std::size_t>(
      std::ceil(top_fraction * static_cast<double>(edges.size())));
  keep = std::min(keep, edges.size());
  while (keep < edges.size() && edges[keep].weight == edges[keep - 1].weight) ++keep;
  edges.resize(keep);
  return edges;
}

inline std::string edges_to_csv(const std::vector<WeightedEdge>& edges) {
  CsvBuilder csv({"j0", "j1", "u"});
  for (const auto& e : edges) csv.row({format_int(e.j0), format_int(e.j1), format_double(e.weight)});
  return csv.str();
}

}  // namespace atlasnerve
