#pragma once

// Seeded samplers for the built-in synthetic manifolds and the per-coordinate
// affine rescaling that squeezes a cloud into the decoders' tanh range.

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

#include "atlasnerve/io.hpp"
#include "atlasnerve/rng.hpp"

namespace atlasnerve {

// Per-coordinate map scaled = slope * x + offset. A slope of 0 marks a
// constant input coordinate: forward sends it to 0 and the inverse returns
// the constant, which is stored in offset.
struct ScalingRecord {
  Eigen::VectorXd slope;
  Eigen::VectorXd offset;

  Eigen::Index dims() const { return slope.size(); }

  Eigen::VectorXd apply(const Eigen::VectorXd& x) const {
    check_dim(x.size());
    Eigen::VectorXd out(x.size());
    for (Eigen::Index c = 0; c < x.size(); ++c)
      out(c) = slope(c) == 0.0 ? 0.0 : slope(c) * x(c) + offset(c);
    return out;
  }

  Eigen::VectorXd invert(const Eigen::VectorXd& y) const {
    check_dim(y.size());
    Eigen::VectorXd out(y.size());
    for (Eigen::Index c = 0; c < y.size(); ++c)
      out(c) = slope(c) == 0.0 ? offset(c) : (y(c) - offset(c)) / slope(c);
    return out;
  }

  void check_dim(Eigen::Index n) const {
    if (n != slope.size())
      throw std::invalid_argument("scaling record has dimension " + format_int(slope.size()) +
                                  ", point has " + format_int(n));
  }
};

// N x n matrix of ambient samples, one point per row.
struct PointCloud {
  Eigen::MatrixXd points;
  std::optional<ScalingRecord> scaling;
  std::optional<std::uint64_t> seed;  // recorded when produced by a sampler

  Eigen::Index count() const { return points.rows(); }
  Eigen::Index dims() const { return points.cols(); }
};

// Uniform angles on the unit circle in R^2.
inline PointCloud sample_circle(Eigen::Index n_points, std::uint64_t seed) {
  if (n_points < 1) throw std::invalid_argument("sample_circle: need at least one point");
  Rng rng(seed);
  PointCloud cloud;
  cloud.seed = seed;
  cloud.points.resize(n_points, 2);
  for (Eigen::Index i = 0; i < n_points; ++i) {
    double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
    cloud.points(i, 0) = std::cos(theta);
    cloud.points(i, 1) = std::sin(theta);
  }
  return cloud;
}

// Product of three unit circles: (cos t1, sin t1, cos t2, sin t2, cos t3, sin t3).
inline PointCloud sample_torus3(Eigen::Index n_points, std::uint64_t seed) {
  if (n_points < 1) throw std::invalid_argument("sample_torus3: need at least one point");
  Rng rng(seed);
  PointCloud cloud;
  cloud.seed = seed;
  cloud.points.resize(n_points, 6);
  for (Eigen::Index i = 0; i < n_points; ++i) {
    for (int axis = 0; axis < 3; ++axis) {
      double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
      cloud.points(i, 2 * axis) = std::cos(theta);
      cloud.points(i, 2 * axis + 1) = std::sin(theta);
    }
  }
  return cloud;
}

// Antipodal-invariant quadratic map identifying the sphere quotient with a
// surface in R^4: (x, y, z) -> (x^2 - y^2, xy, xz, yz).
inline Eigen::Vector4d rp2_embed(double x, double y, double z) {
  return {x * x - y * y, x * y, x * z, y * z};
}

// Uniform points on the sphere (normalized Gaussians) pushed through
// rp2_embed, giving a uniform sample of the projective plane in R^4.
inline PointCloud sample_rp2(Eigen::Index n_points, std::uint64_t seed) {
  if (n_points < 1) throw std::invalid_argument("sample_rp2: need at least one point");
  Rng rng(seed);
  PointCloud cloud;
  cloud.seed = seed;
  cloud.points.resize(n_points, 4);
  for (Eigen::Index i = 0; i < n_points; ++i) {
    double x, y, z, norm;
    do {
      x = rng.normal();
      y = rng.normal();
      z = rng.normal();
      norm = std::sqrt(x * x + y * y + z * z);
    } while (norm < 1e-12);
    cloud.points.row(i) = rp2_embed(x / norm, y / norm, z / norm).transpose();
  }
  return cloud;
}

// Per-coordinate affine map onto [-half_width, half_width]. Constant
// coordinates collapse to 0 with the constant kept for inversion.
inline PointCloud rescale(const PointCloud& cloud, double half_width = 0.95) {
  if (cloud.count() < 1) throw std::invalid_argument("rescale: empty cloud");
  ScalingRecord record;
  record.slope.resize(cloud.dims());
  record.offset.resize(cloud.dims());
  for (Eigen::Index c = 0; c < cloud.dims(); ++c) {
    double lo = cloud.points.col(c).minCoeff();
    double hi = cloud.points.col(c).maxCoeff();
    if (hi > lo) {
      record.slope(c) = 2.0 * half_width / (hi - lo);
      record.offset(c) = half_width - record.slope(c) * hi;
    } else {
      record.slope(c) = 0.0;
      record.offset(c) = lo;
    }
  }
  PointCloud scaled;
  scaled.seed = cloud.seed;
  scaled.scaling = record;
  scaled.points.resize(cloud.count(), cloud.dims());
  for (Eigen::Index i = 0; i < cloud.count(); ++i)
    scaled.points.row(i) = record.apply(cloud.points.row(i).transpose()).transpose();
  return scaled;
}

// ---------------------------------------------------------------------------
// Cloud files: headerless CSV (one point per row) plus a `<path>.meta`
// sidecar recording n, N, seed, and the scaling record.

inline std::string cloud_to_csv(const PointCloud& cloud) {
  std::string out;
  for (Eigen::Index i = 0; i < cloud.count(); ++i) {
    for (Eigen::Index j = 0; j < cloud.dims(); ++j) {
      if (j) out += ',';
      out += format_double(cloud.points(i, j));
    }
    out += '\n';
  }
  return out;
}

inline void write_cloud_csv(const std::filesystem::path& path, const PointCloud& cloud) {
  write_text_file(path, cloud_to_csv(cloud));
  FlatConfig meta;
  meta.set("cloud.dims", format_int(cloud.dims()));
  meta.set("cloud.count", format_int(cloud.count()));
  if (cloud.seed) meta.set("cloud.seed", format_int(static_cast<std::int64_t>(*cloud.seed)));
  meta.set("scaling.present", cloud.scaling ? "true" : "false");
  if (cloud.scaling) {
    for (Eigen::Index c = 0; c < cloud.scaling->dims(); ++c) {
      meta.set("scaling.slope." + format_int(c), format_double(cloud.scaling->slope(c)));
      meta.set("scaling.offset." + format_int(c), format_double(cloud.scaling->offset(c)));
    }
  }
  write_text_file(path.string() + ".meta", meta.serialize());
}

inline PointCloud parse_cloud_csv(const std::string& text) {
  PointCloud cloud;
  std::vector<std::vector<double>> rows;
  for (const auto& raw_line : split(text, '\n')) {
    auto line = trim(raw_line);
    if (line.empty()) continue;
    std::vector<double> row;
    for (const auto& cell : split(line, ',')) row.push_back(parse_double(trim(cell)));
    if (!rows.empty() && row.size() != rows.front().size())
      throw std::invalid_argument("cloud CSV has ragged rows");
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::invalid_argument("cloud CSV has no points");
  cloud.points.resize(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      cloud.points(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return cloud;
}

inline PointCloud read_cloud_csv(const std::filesystem::path& path) {
  PointCloud cloud = parse_cloud_csv(read_text_file(path));
  auto meta_path = path.string() + ".meta";
  if (std::filesystem::exists(meta_path)) {
    FlatConfig meta = FlatConfig::load(meta_path);
    if (meta.has("cloud.seed"))
      cloud.seed = static_cast<std::uint64_t>(meta.get_int("cloud.seed", 0));
    if (meta.get_bool("scaling.present", false)) {
      ScalingRecord record;
      record.slope.resize(cloud.dims());
      record.offset.resize(cloud.dims());
      for (Eigen::Index c = 0; c < cloud.dims(); ++c) {
        record.slope(c) = meta.get_double("scaling.slope." + format_int(c), 0.0);
        record.offset(c) = meta.get_double("scaling.offset." + format_int(c), 0.0);
      }
      cloud.scaling = record;
    }
  }
  return cloud;
}

}  // namespace atlasnerve
