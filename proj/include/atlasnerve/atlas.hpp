#pragma once

// The k-chart generative model: per-chart encoder/decoder pairs, a softmax
// chart-membership network, and one sigmoid discriminator head per chart
// acting on the latent cube (-1,1)^d.
//
// Encoders come in two kinds. `linear` is a single identity-activation layer
// (an affine map, no clamping), so the latent image may leave the cube early
// in training and is pulled in by the adversarial term. `mlp` stacks relu
// hidden layers and ends in tanh, so outputs always lie inside the cube.
// With shared_trunk=true (mlp kind) the encoders and the membership network
// consume a common relu trunk instead of the raw input.
//
// Coordinates: encode/decode/membership/discriminate work in the model's
// internal (rescaled) coordinates. reconstruct, generate, and
// membership_matrix accept/emit original data units and translate through
// the stored scaling record when one is present.

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "atlasnerve/io.hpp"
#include "atlasnerve/manifolds.hpp"
#include "atlasnerve/nerve.hpp"
#include "atlasnerve/nn.hpp"
#include "atlasnerve/rng.hpp"

namespace atlasnerve {

enum class EncoderKind { linear, mlp };

inline std::string encoder_kind_name(EncoderKind kind) {
  return kind == EncoderKind::linear ? "linear" : "mlp";
}

inline EncoderKind encoder_kind_from_name(const std::string& name) {
  if (name == "linear") return EncoderKind::linear;
  if (name == "mlp") return EncoderKind::mlp;
  throw std::invalid_argument("unknown encoder kind: '" + name + "'");
}

struct AtlasConfig {
  int ambient_dim = 2;  // n
  int latent_dim = 1;   // d
  int chart_count = 1;  // k
  EncoderKind encoder_kind = EncoderKind::linear;
  std::vector<int> encoder_hidden{16};
  std::vector<int> decoder_hidden{16, 16};
  std::vector<int> membership_hidden{16};
  std::vector<int> discriminator_hidden{16, 16};
  // Activation of the membership net's hidden stack. With identity the chart
  // logits are affine in the ambient coordinates, which keeps the chart
  // regions simple; the geometric presets rely on that.
  Activation membership_hidden_activation = Activation::relu;
  bool shared_trunk = false;  // mlp encoders + membership share the hidden stack
  std::uint64_t seed = 1;

  void validate() const {
    if (ambient_dim < 1) throw std::invalid_argument("ambient_dim must be >= 1");
    if (latent_dim < 1) throw std::invalid_argument("latent_dim must be >= 1");
    if (chart_count < 1) throw std::invalid_argument("chart_count must be >= 1");
    if (latent_dim > ambient_dim)
      throw std::invalid_argument("latent_dim " + format_int(latent_dim) +
                                  " exceeds ambient_dim " + format_int(ambient_dim));
    if (shared_trunk && encoder_kind != EncoderKind::mlp)
      throw std::invalid_argument("shared_trunk requires mlp encoders");
    if (shared_trunk && encoder_hidden.empty())
      throw std::invalid_argument("shared_trunk requires at least one hidden layer");
  }
};

// Uniform prior on the latent cube times the chart labels.
struct LatentPrior {
  int latent_dim = 1;
  int chart_count = 1;

  // Returns (chart in [1,k], z uniform on (-1,1)^d), independent.
  std::pair<int, Eigen::VectorXd> sample(Rng& rng) const {
    int chart = 1 + static_cast<int>(rng.below(chart_count));
    Eigen::VectorXd z(latent_dim);
    for (int i = 0; i < latent_dim; ++i) z(i) = rng.uniform(-1.0, 1.0);
    return {chart, z};
  }
};

struct AtlasModel {
  AtlasConfig config;
  std::optional<Mlp> trunk;  // present iff config.shared_trunk
  std::vector<Mlp> encoders;
  std::vector<Mlp> decoders;
  Mlp membership_net;
  std::vector<Mlp> discriminators;
  std::optional<ScalingRecord> scaling;

  LatentPrior prior() const { return {config.latent_dim, config.chart_count}; }

  void check_chart(int j) const {
    if (j < 1 || j > config.chart_count)
      throw std::invalid_argument("chart index " + format_int(j) + " outside [1, " +
                                  format_int(config.chart_count) + "]");
  }
};

// Seeded parameter initialization; networks are created in a fixed order so
// a seed pins the whole model.
inline AtlasModel make_atlas(const AtlasConfig& config) {
  config.validate();
  AtlasModel model;
  model.config = config;
  Rng rng(config.seed);

  if (config.shared_trunk) {
    std::vector<int> front(config.encoder_hidden.begin(), config.encoder_hidden.end() - 1);
    model.trunk = make_mlp(config.ambient_dim, front, config.encoder_hidden.back(),
                           Activation::relu, Activation::relu, rng);
  }
  int encoder_input = config.shared_trunk ? config.encoder_hidden.back() : config.ambient_dim;

  for (int j = 0; j < config.chart_count; ++j) {
    if (config.encoder_kind == EncoderKind::linear) {
      model.encoders.push_back(make_mlp(config.ambient_dim, {}, config.latent_dim,
                                        Activation::identity, Activation::identity, rng));
    } else if (config.shared_trunk) {
      model.encoders.push_back(
          make_mlp(encoder_input, {}, config.latent_dim, Activation::relu, Activation::tanh, rng));
    } else {
      model.encoders.push_back(make_mlp(config.ambient_dim, config.encoder_hidden,
                                        config.latent_dim, Activation::relu, Activation::tanh,
                                        rng));
    }
  }
  for (int j = 0; j < config.chart_count; ++j)
    model.decoders.push_back(make_mlp(config.latent_dim, config.decoder_hidden,
                                      config.ambient_dim, Activation::relu, Activation::tanh,
                                      rng));
  if (config.shared_trunk) {
    model.membership_net = make_mlp(encoder_input, {}, config.chart_count, Activation::relu,
                                    Activation::softmax, rng);
  } else {
    model.membership_net =
        make_mlp(config.ambient_dim, config.membership_hidden, config.chart_count,
                 config.membership_hidden_activation, Activation::softmax, rng);
  }
  for (int j = 0; j < config.chart_count; ++j)
    model.discriminators.push_back(make_mlp(config.latent_dim, config.discriminator_hidden, 1,
                                            Activation::relu, Activation::sigmoid, rng));
  return model;
}

namespace detail {

inline Eigen::MatrixXd encoder_input_batch(const AtlasModel& model, const Eigen::MatrixXd& x) {
  return model.trunk ? forward_batch(*model.trunk, x) : x;
}

}  // namespace detail

// psi_j in model coordinates.
inline Eigen::VectorXd encode(const AtlasModel& model, int j, const Eigen::VectorXd& x) {
  model.check_chart(j);
  if (x.size() != model.config.ambient_dim)
    throw std::invalid_argument("encode: point has dimension " + format_int(x.size()) +
                                ", model expects " + format_int(model.config.ambient_dim));
  return forward(model.encoders[static_cast<std::size_t>(j - 1)],
                 detail::encoder_input_batch(model, x));
}

// phi_j on the latent cube.
inline Eigen::VectorXd decode(const AtlasModel& model, int j, const Eigen::VectorXd& z) {
  model.check_chart(j);
  if (z.size() != model.config.latent_dim)
    throw std::invalid_argument("decode: point has dimension " + format_int(z.size()) +
                                ", model expects " + format_int(model.config.latent_dim));
  return forward(model.decoders[static_cast<std::size_t>(j - 1)], z);
}

// q(.|x), a probability vector over the k charts.
inline Eigen::VectorXd membership(const AtlasModel& model, const Eigen::VectorXd& x) {
  if (x.size() != model.config.ambient_dim)
    throw std::invalid_argument("membership: point has dimension " + format_int(x.size()) +
                                ", model expects " + format_int(model.config.ambient_dim));
  return forward(model.membership_net, detail::encoder_input_batch(model, x));
}

// D_j(z) in (0,1).
inline double discriminate(const AtlasModel& model, int j, const Eigen::VectorXd& z) {
  model.check_chart(j);
  if (z.size() != model.config.latent_dim)
    throw std::invalid_argument("discriminate: point has dimension " + format_int(z.size()) +
                                ", model expects " + format_int(model.config.latent_dim));
  return forward(model.discriminators[static_cast<std::size_t>(j - 1)], z)(0);
}

struct Reconstruction {
  std::vector<Eigen::VectorXd> per_chart;  // phi_j(psi_j(x)), original units
  Eigen::VectorXd weights;                 // q(.|x)
  double weighted_error = 0.0;             // sum_j q(j|x) |x - phi_j(psi_j(x))|^2, model units
};

// Per-chart round trips of one ambient point plus the membership weights.
// The weighted error is the model-coordinate quantity that training averages.
inline Reconstruction reconstruct(const AtlasModel& model, const Eigen::VectorXd& x_ambient) {
  if (x_ambient.size() != model.config.ambient_dim)
    throw std::invalid_argument("reconstruct: point has dimension " + format_int(x_ambient.size()) +
                                ", model expects " + format_int(model.config.ambient_dim));
  Eigen::VectorXd x = model.scaling ? model.scaling->apply(x_ambient) : x_ambient;

  Reconstruction result;
  result.weights = membership(model, x);
  for (int j = 1; j <= model.config.chart_count; ++j) {
    Eigen::VectorXd round_trip = decode(model, j, encode(model, j, x));
    result.weighted_error += result.weights(j - 1) * (x - round_trip).squaredNorm();
    result.per_chart.push_back(model.scaling ? model.scaling->invert(round_trip) : round_trip);
  }
  return result;
}

struct GeneratedSample {
  int chart = 0;
  Eigen::VectorXd point;  // original units
};

// Draw (j, z) from the prior and push z through chart j's decoder.
inline std::vector<GeneratedSample> generate(const AtlasModel& model, std::uint64_t seed,
                                             Eigen::Index count) {
  if (count < 0) throw std::invalid_argument("generate: count must be nonnegative");
  Rng rng(seed);
  LatentPrior prior = model.prior();
  std::vector<GeneratedSample> out;
  out.reserve(static_cast<std::size_t>(count));
  for (Eigen::Index i = 0; i < count; ++i) {
    auto [chart, z] = prior.sample(rng);
    Eigen::VectorXd point = decode(model, chart, z);
    if (model.scaling) point = model.scaling->invert(point);
    out.push_back({chart, std::move(point)});
  }
  return out;
}

// Membership rows for a cloud given in original units.
inline MembershipMatrix membership_matrix(const AtlasModel& model, const PointCloud& cloud) {
  if (cloud.dims() != model.config.ambient_dim)
    throw std::invalid_argument("cloud dimension " + format_int(cloud.dims()) +
                                " does not match model ambient dimension " +
                                format_int(model.config.ambient_dim));
  MembershipMatrix m;
  m.values.resize(cloud.count(), model.config.chart_count);
  for (Eigen::Index i = 0; i < cloud.count(); ++i) {
    Eigen::VectorXd x = cloud.points.row(i).transpose();
    if (model.scaling) x = model.scaling->apply(x);
    m.values.row(i) = membership(model, x).transpose();
  }
  return m;
}

// ---------------------------------------------------------------------------
// Model files: a manifest section (config + scaling) followed by each
// network in the nn serialization format, fixed order.

inline std::string serialize_atlas(const AtlasModel& model) {
  const AtlasConfig& cfg = model.config;
  std::string out;
  out += "atlasnerve-model 1\n";
  out += "ambient_dim " + format_int(cfg.ambient_dim) + "\n";
  out += "latent_dim " + format_int(cfg.latent_dim) + "\n";
  out += "chart_count " + format_int(cfg.chart_count) + "\n";
  out += "encoder_kind " + encoder_kind_name(cfg.encoder_kind) + "\n";
  out += "encoder_hidden " + format_int_list(cfg.encoder_hidden) + "\n";
  out += "decoder_hidden " + format_int_list(cfg.decoder_hidden) + "\n";
  out += "membership_hidden " + format_int_list(cfg.membership_hidden) + "\n";
  out += "membership_hidden_activation " + activation_name(cfg.membership_hidden_activation) + "\n";
  out += "discriminator_hidden " + format_int_list(cfg.discriminator_hidden) + "\n";
  out += std::string("shared_trunk ") + (cfg.shared_trunk ? "1" : "0") + "\n";
  out += "seed " + format_int(static_cast<std::int64_t>(cfg.seed)) + "\n";
  if (model.scaling) {
    out += "scaling " + format_int(model.scaling->dims()) + "\n";
    for (Eigen::Index c = 0; c < model.scaling->dims(); ++c)
      out += format_double(model.scaling->slope(c)) + " " +
             format_double(model.scaling->offset(c)) + "\n";
  } else {
    out += "scaling none\n";
  }
  if (model.trunk) serialize_mlp(*model.trunk, out);
  for (const auto& net : model.encoders) serialize_mlp(net, out);
  for (const auto& net : model.decoders) serialize_mlp(net, out);
  serialize_mlp(model.membership_net, out);
  for (const auto& net : model.discriminators) serialize_mlp(net, out);
  return out;
}

inline void save_atlas(const std::filesystem::path& path, const AtlasModel& model) {
  write_text_file(path, serialize_atlas(model));
}

inline AtlasModel parse_atlas(const std::string& text) {
  LineCursor cursor(text);
  if (cursor.next() != "atlasnerve-model 1")
    throw std::invalid_argument("not an atlasnerve model file");

  auto field = [&](const std::string& name) {
    auto parts = split(cursor.next(), ' ');
    if (parts.size() != 2 || parts[0] != name)
      throw std::invalid_argument("model file: expected field '" + name + "'");
    return parts[1];
  };

  AtlasModel model;
  AtlasConfig cfg;
  cfg.ambient_dim = static_cast<int>(parse_int(field("ambient_dim")));
  cfg.latent_dim = static_cast<int>(parse_int(field("latent_dim")));
  cfg.chart_count = static_cast<int>(parse_int(field("chart_count")));
  cfg.encoder_kind = encoder_kind_from_name(field("encoder_kind"));
  auto parse_list = [](const std::string& text_list) {
    std::vector<int> out;
    if (text_list == "-") return out;
    for (const auto& cell : split(text_list, ',')) out.push_back(static_cast<int>(parse_int(cell)));
    return out;
  };
  cfg.encoder_hidden = parse_list(field("encoder_hidden"));
  cfg.decoder_hidden = parse_list(field("decoder_hidden"));
  cfg.membership_hidden = parse_list(field("membership_hidden"));
  cfg.membership_hidden_activation = activation_from_name(field("membership_hidden_activation"));
  cfg.discriminator_hidden = parse_list(field("discriminator_hidden"));
  cfg.shared_trunk = field("shared_trunk") == "1";
  cfg.seed = static_cast<std::uint64_t>(parse_int(field("seed")));
  cfg.validate();
  model.config = cfg;

  auto scaling_header = split(cursor.next(), ' ');
  if (scaling_header.size() != 2 || scaling_header[0] != "scaling")
    throw std::invalid_argument("model file: expected scaling section");
  if (scaling_header[1] != "none") {
    auto dims = parse_int(scaling_header[1]);
    ScalingRecord record;
    record.slope.resize(dims);
    record.offset.resize(dims);
    for (std::int64_t c = 0; c < dims; ++c) {
      auto cells = split(cursor.next(), ' ');
      if (cells.size() != 2) throw std::invalid_argument("model file: bad scaling row");
      record.slope(c) = parse_double(cells[0]);
      record.offset(c) = parse_double(cells[1]);
    }
    model.scaling = std::move(record);
  }

  if (cfg.shared_trunk) model.trunk = parse_mlp(cursor);
  for (int j = 0; j < cfg.chart_count; ++j) model.encoders.push_back(parse_mlp(cursor));
  for (int j = 0; j < cfg.chart_count; ++j) model.decoders.push_back(parse_mlp(cursor));
  model.membership_net = parse_mlp(cursor);
  for (int j = 0; j < cfg.chart_count; ++j) model.discriminators.push_back(parse_mlp(cursor));
  if (!cursor.done()) throw std::invalid_argument("model file: trailing content");
  return model;
}

inline AtlasModel load_atlas(const std::filesystem::path& path) {
  try {
    return parse_atlas(read_text_file(path));
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
}

// Networks trained by each objective, used by the trainer and by parameter
// bookkeeping (RMSprop state, parameter diffing in tests).
template <typename F>
void visit_networks(AtlasModel& model, F&& f) {
  if (model.trunk) f(*model.trunk);
  for (auto& net : model.encoders) f(net);
  for (auto& net : model.decoders) f(net);
  f(model.membership_net);
  for (auto& net : model.discriminators) f(net);
}

}  // namespace atlasnerve
