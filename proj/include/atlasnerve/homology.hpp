#pragma once

// Integer simplicial homology: boundary matrices, Smith normal form over Z,
// Betti numbers and torsion coefficients. Torsion matters here: it is what
// separates a first homology group of Z/2 from a free one, so all ranks are
// computed over Z rather than a field.
//
// Arithmetic is overflow-checked 64-bit. Smith reduction pivots on the entry
// of minimal absolute value, which keeps coefficient growth tame for the
// small nerve complexes this library produces; if an operation would still
// overflow, the computation fails loudly instead of wrapping.

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "atlasnerve/io.hpp"

namespace atlasnerve {

using Simplex = std::vector<int>;  // sorted, distinct vertex ids

inline Simplex normalized_simplex(Simplex s) {
  std::sort(s.begin(), s.end());
  if (std::adjacent_find(s.begin(), s.end()) != s.end())
    throw std::invalid_argument("simplex has repeated vertices");
  return s;
}

class SimplicialComplex {
 public:
  // Insert one simplex as given (faces are not added).
  void insert(Simplex s) {
    if (s.empty()) throw std::invalid_argument("empty simplex");
    s = normalized_simplex(std::move(s));
    auto dim = s.size() - 1;
    if (by_dim_.size() <= dim) by_dim_.resize(dim + 1);
    by_dim_[dim].insert(std::move(s));
  }

  // Insert a simplex together with all of its faces.
  void insert_closed(const Simplex& s) {
    Simplex base = normalized_simplex(s);
    auto n = base.size();
    for (std::uint32_t mask = 1; mask < (1u << n); ++mask) {
      Simplex face;
      for (std::size_t i = 0; i < n; ++i)
        if (mask & (1u << i)) face.push_back(base[i]);
      insert(std::move(face));
    }
  }

  bool contains(const Simplex& s) const {
    if (s.empty()) return false;
    auto dim = s.size() - 1;
    if (dim >= by_dim_.size()) return false;
    return by_dim_[dim].count(normalized_simplex(s)) != 0;
  }

  // -1 for the empty complex.
  int dimension() const {
    for (int d = static_cast<int>(by_dim_.size()) - 1; d >= 0; --d)
      if (!by_dim_[static_cast<std::size_t>(d)].empty()) return d;
    return -1;
  }

  std::size_t size(int dim) const {
    if (dim < 0 || static_cast<std::size_t>(dim) >= by_dim_.size()) return 0;
    return by_dim_[static_cast<std::size_t>(dim)].size();
  }

  std::size_t total_size() const {
    std::size_t n = 0;
    for (const auto& level : by_dim_) n += level.size();
    return n;
  }

  std::vector<Simplex> simplices(int dim) const {
    if (dim < 0 || static_cast<std::size_t>(dim) >= by_dim_.size()) return {};
    const auto& level = by_dim_[static_cast<std::size_t>(dim)];
    return std::vector<Simplex>(level.begin(), level.end());
  }

  bool is_downward_closed() const {
    for (std::size_t dim = 1; dim < by_dim_.size(); ++dim) {
      for (const auto& s : by_dim_[dim]) {
        for (std::size_t omit = 0; omit < s.size(); ++omit) {
          Simplex face;
          face.reserve(s.size() - 1);
          for (std::size_t i = 0; i < s.size(); ++i)
            if (i != omit) face.push_back(s[i]);
          if (!contains(face)) return false;
        }
      }
    }
    return true;
  }

  // One simplex per line, vertex ids space-separated, dimension ascending.
  std::string to_text() const {
    std::string out;
    for (const auto& level : by_dim_) {
      for (const auto& s : level) {
        for (std::size_t i = 0; i < s.size(); ++i) {
          if (i) out += ' ';
          out += format_int(s[i]);
        }
        out += '\n';
      }
    }
    return out;
  }

  bool operator==(const SimplicialComplex& other) const {
    int dmax = std::max(dimension(), other.dimension());
    for (int d = 0; d <= dmax; ++d)
      if (simplices(d) != other.simplices(d)) return false;
    return true;
  }

 private:
  std::vector<std::set<Simplex>> by_dim_;
};

// ---------------------------------------------------------------------------
// Overflow-checked 64-bit integer matrix.

inline std::int64_t checked_add(std::int64_t a, std::int64_t b) {
  std::int64_t r;
  if (__builtin_add_overflow(a, b, &r)) throw std::overflow_error("integer overflow in homology arithmetic");
  return r;
}

inline std::int64_t checked_sub(std::int64_t a, std::int64_t b) {
  std::int64_t r;
  if (__builtin_sub_overflow(a, b, &r)) throw std::overflow_error("integer overflow in homology arithmetic");
  return r;
}

inline std::int64_t checked_mul(std::int64_t a, std::int64_t b) {
  std::int64_t r;
  if (__builtin_mul_overflow(a, b, &r)) throw std::overflow_error("integer overflow in homology arithmetic");
  return r;
}

struct IntMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::int64_t> data;  // row-major

  IntMatrix() = default;
  IntMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0) {}

  std::int64_t& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  std::int64_t at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
};

// Boundary operator from ell-chains to (ell-1)-chains. Rows are indexed by
// the sorted list of (ell-1)-simplices, columns by the ell-simplices; the
// facet omitting vertex position p carries sign (-1)^p.
inline IntMatrix boundary_matrix(const SimplicialComplex& complex, int ell) {
  if (ell < 1) throw std::invalid_argument("boundary_matrix: degree must be >= 1");
  auto rows_list = complex.simplices(ell - 1);
  auto cols_list = complex.simplices(ell);
  std::map<Simplex, std::size_t> row_index;
  for (std::size_t i = 0; i < rows_list.size(); ++i) row_index[rows_list[i]] = i;

  IntMatrix mat(rows_list.size(), cols_list.size());
  for (std::size_t c = 0; c < cols_list.size(); ++c) {
    const Simplex& s = cols_list[c];
    for (std::size_t omit = 0; omit < s.size(); ++omit) {
      Simplex face;
      face.reserve(s.size() - 1);
      for (std::size_t i = 0; i < s.size(); ++i)
        if (i != omit) face.push_back(s[i]);
      auto it = row_index.find(face);
      if (it == row_index.end())
        throw std::invalid_argument("boundary_matrix: complex is not downward-closed");
      mat.at(it->second, c) = (omit % 2 == 0) ? 1 : -1;
    }
  }
  return mat;
}

struct SmithNormalForm {
  std::vector<std::int64_t> diagonal;  // nonzero entries, d1 | d2 | ...
  std::size_t rank = 0;
};

// Smith normal form by row/column reduction with minimal-|pivot| selection.
// Unimodular transforms are not tracked; only the diagonal is needed.
inline SmithNormalForm smith_normal_form(IntMatrix a) {
  SmithNormalForm result;
  std::size_t t = 0;
  const std::size_t limit = std::min(a.rows, a.cols);

  auto swap_rows = [&](std::size_t r1, std::size_t r2) {
    if (r1 == r2) return;
    for (std::size_t j = 0; j < a.cols; ++j) std::swap(a.at(r1, j), a.at(r2, j));
  };
  auto swap_cols = [&](std::size_t c1, std::size_t c2) {
    if (c1 == c2) return;
    for (std::size_t i = 0; i < a.rows; ++i) std::swap(a.at(i, c1), a.at(i, c2));
  };

  while (t < limit) {
    // Locate the nonzero entry of minimal absolute value in the submatrix.
    bool found = false;
    std::size_t pi = t, pj = t;
    std::int64_t best = 0;
    for (std::size_t i = t; i < a.rows; ++i) {
      for (std::size_t j = t; j < a.cols; ++j) {
        std::int64_t v = a.at(i, j);
        if (v == 0) continue;
        std::int64_t mag = v < 0 ? -v : v;  // |INT64_MIN| would overflow, but entries never reach it
        if (!found || mag < best) {
          found = true;
          best = mag;
          pi = i;
          pj = j;
        }
      }
    }
    if (!found) break;
    swap_rows(t, pi);
    swap_cols(t, pj);

    bool clean = false;
    while (!clean) {
      clean = true;
      // Clear column t with row operations; a nonzero remainder becomes the
      // new (smaller) pivot, which is the Euclidean step.
      for (std::size_t i = t + 1; i < a.rows; ++i) {
        if (a.at(i, t) == 0) continue;
        std::int64_t q = a.at(i, t) / a.at(t, t);
        if (q != 0)
          for (std::size_t j = t; j < a.cols; ++j)
            a.at(i, j) = checked_sub(a.at(i, j), checked_mul(q, a.at(t, j)));
        if (a.at(i, t) != 0) {
          swap_rows(t, i);
          clean = false;
        }
      }
      for (std::size_t j = t + 1; j < a.cols; ++j) {
        if (a.at(t, j) == 0) continue;
        std::int64_t q = a.at(t, j) / a.at(t, t);
        if (q != 0)
          for (std::size_t i = t; i < a.rows; ++i)
            a.at(i, j) = checked_sub(a.at(i, j), checked_mul(q, a.at(i, t)));
        if (a.at(t, j) != 0) {
          swap_cols(t, j);
          clean = false;
        }
      }
      if (!clean) continue;

      // Divisibility: the pivot must divide every remaining entry. If not,
      // fold the offending row into row t and reduce again.
      for (std::size_t i = t + 1; i < a.rows && clean; ++i) {
        for (std::size_t j = t + 1; j < a.cols && clean; ++j) {
          if (a.at(i, j) % a.at(t, t) != 0) {
            for (std::size_t jj = t; jj < a.cols; ++jj)
              a.at(t, jj) = checked_add(a.at(t, jj), a.at(i, jj));
            clean = false;
          }
        }
      }
    }
    ++t;
  }

  result.rank = t;
  result.diagonal.reserve(t);
  for (std::size_t i = 0; i < t; ++i) {
    std::int64_t v = a.at(i, i);
    result.diagonal.push_back(v < 0 ? -v : v);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Homology report.

struct HomologyGroup {
  int degree = 0;
  std::int64_t betti = 0;
  std::vector<std::int64_t> torsion;  // each >= 2, divisibility chain

  bool trivial() const { return betti == 0 && torsion.empty(); }

  // e.g. "Z", "Z/2", "Z^2 (+) Z/2", "0"
  std::string describe() const {
    if (trivial()) return "0";
    std::string out;
    if (betti == 1) {
      out = "Z";
    } else if (betti > 1) {
      out = "Z^" + format_int(betti);
    }
    for (auto torsion_factor : torsion) {
      if (!out.empty()) out += " (+) ";
      out += "Z/" + format_int(torsion_factor);
    }
    return out;
  }
};

struct HomologyReport {
  std::vector<HomologyGroup> groups;  // degrees 0..max

  const HomologyGroup& at(int degree) const {
    static const HomologyGroup zero{};
    for (const auto& g : groups)
      if (g.degree == degree) return g;
    return zero;
  }

  std::string to_text() const {
    std::string out;
    for (const auto& g : groups)
      out += "H_" + format_int(g.degree) + " = " + g.describe() + "\n";
    return out;
  }

  // Rows: degree, betti, torsion list (semicolon-separated).
  std::string to_csv() const {
    CsvBuilder csv({"degree", "betti", "torsion"});
    for (const auto& g : groups)
      csv.row({format_int(g.degree), format_int(g.betti), torsion_field(g.torsion)});
    return csv.str();
  }

  static std::string torsion_field(const std::vector<std::int64_t>& torsion) {
    std::string out;
    for (std::size_t i = 0; i < torsion.size(); ++i) {
      if (i) out += ';';
      out += format_int(torsion[i]);
    }
    return out;
  }
};

// Unreduced integer homology in degrees 0..max_degree:
//   betti_l  = #l-simplices - rank d_l - rank d_{l+1}
//   torsion_l = Smith diagonal entries of d_{l+1} that exceed 1.
inline HomologyReport homology_groups(const SimplicialComplex& complex, int max_degree) {
  if (max_degree < 0) throw std::invalid_argument("homology_groups: max_degree must be >= 0");
  HomologyReport report;
  if (complex.dimension() < 0) return report;

  int top = std::min(max_degree, complex.dimension());
  std::vector<SmithNormalForm> snf(static_cast<std::size_t>(top) + 2);
  for (int ell = 1; ell <= top + 1; ++ell) {
    if (ell > complex.dimension() || complex.size(ell) == 0) break;
    snf[static_cast<std::size_t>(ell)] = smith_normal_form(boundary_matrix(complex, ell));
  }

  for (int ell = 0; ell <= top; ++ell) {
    HomologyGroup g;
    g.degree = ell;
    std::size_t rank_down = ell == 0 ? 0 : snf[static_cast<std::size_t>(ell)].rank;
    const auto& up = snf[static_cast<std::size_t>(ell) + 1];
    g.betti = static_cast<std::int64_t>(complex.size(ell)) -
              static_cast<std::int64_t>(rank_down) - static_cast<std::int64_t>(up.rank);
    for (auto d : up.diagonal)
      if (d > 1) g.torsion.push_back(d);
    report.groups.push_back(std::move(g));
  }
  return report;
}

inline HomologyReport homology_groups(const SimplicialComplex& complex) {
  int dim = complex.dimension();
  return homology_groups(complex, dim < 0 ? 0 : dim);
}

}  // namespace atlasnerve
