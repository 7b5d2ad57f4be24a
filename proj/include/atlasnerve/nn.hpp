#pragma once

// Minimal dense network engine: affine layers with fixed activations, exact
// reverse-mode gradients, and RMSprop.
//
// Everything is batch-oriented. A batch is a matrix with one sample per
// column, and gradients are the exact derivatives of
//   sum_b <upstream_col_b, forward(x_col_b)>
// with respect to every weight, bias, and the input; callers fold any 1/N
// averaging into the upstream matrix. Forward and backward are pure given
// the parameters, so identical inputs give bit-identical outputs.

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "atlasnerve/io.hpp"
#include "atlasnerve/rng.hpp"

namespace atlasnerve {

enum class Activation { identity, relu, tanh, softmax, sigmoid };

inline std::string activation_name(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    case Activation::softmax: return "softmax";
    case Activation::sigmoid: return "sigmoid";
  }
  throw std::logic_error("unknown activation");
}

inline Activation activation_from_name(const std::string& name) {
  if (name == "identity") return Activation::identity;
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh;
  if (name == "softmax") return Activation::softmax;
  if (name == "sigmoid") return Activation::sigmoid;
  throw std::invalid_argument("unknown activation name: '" + name + "'");
}

struct DenseLayer {
  Eigen::MatrixXd weights;  // out x in
  Eigen::VectorXd biases;   // out
  Activation activation = Activation::identity;

  Eigen::Index input_dim() const { return weights.cols(); }
  Eigen::Index output_dim() const { return weights.rows(); }
};

struct Mlp {
  std::vector<DenseLayer> layers;

  Eigen::Index input_dim() const { return layers.front().input_dim(); }
  Eigen::Index output_dim() const { return layers.back().output_dim(); }

  void validate() const {
    if (layers.empty()) throw std::invalid_argument("mlp has no layers");
    for (std::size_t l = 0; l < layers.size(); ++l) {
      if (layers[l].biases.size() != layers[l].weights.rows())
        throw std::invalid_argument("layer " + format_int(l) + ": bias/weight shape mismatch");
      if (l > 0 && layers[l].input_dim() != layers[l - 1].output_dim())
        throw std::invalid_argument("layer " + format_int(l) +
                                    ": input dimension does not match previous output");
    }
  }
};

namespace detail {

// Numerically stable softmax, columnwise, with max subtraction.
inline Eigen::MatrixXd softmax_columns(const Eigen::MatrixXd& s) {
  Eigen::MatrixXd out(s.rows(), s.cols());
  for (Eigen::Index c = 0; c < s.cols(); ++c) {
    double peak = s.col(c).maxCoeff();
    Eigen::VectorXd e = (s.col(c).array() - peak).exp();
    out.col(c) = e / e.sum();
  }
  return out;
}

inline Eigen::MatrixXd apply_activation(Activation a, const Eigen::MatrixXd& s) {
  switch (a) {
    case Activation::identity: return s;
    case Activation::relu: return s.cwiseMax(0.0);
    case Activation::tanh: return s.array().tanh().matrix();
    case Activation::sigmoid: return (1.0 / (1.0 + (-s.array()).exp())).matrix();
    case Activation::softmax: return softmax_columns(s);
  }
  throw std::logic_error("unknown activation");
}

// d(loss)/d(pre-activation) from the layer output and d(loss)/d(output).
inline Eigen::MatrixXd activation_backward(Activation a, const Eigen::MatrixXd& y,
                                           const Eigen::MatrixXd& dy) {
  switch (a) {
    case Activation::identity: return dy;
    case Activation::relu:
      return (y.array() > 0.0).select(dy, Eigen::MatrixXd::Zero(dy.rows(), dy.cols()));
    case Activation::tanh: return (dy.array() * (1.0 - y.array().square())).matrix();
    case Activation::sigmoid: return (dy.array() * y.array() * (1.0 - y.array())).matrix();
    case Activation::softmax: {
      Eigen::MatrixXd ds(y.rows(), y.cols());
      for (Eigen::Index c = 0; c < y.cols(); ++c) {
        double inner = y.col(c).dot(dy.col(c));
        ds.col(c) = y.col(c).cwiseProduct(dy.col(c) - Eigen::VectorXd::Constant(y.rows(), inner));
      }
      return ds;
    }
  }
  throw std::logic_error("unknown activation");
}

}  // namespace detail

// Per-layer outputs of one forward pass, kept for the backward pass.
struct ForwardTrace {
  Eigen::MatrixXd input;
  std::vector<Eigen::MatrixXd> outputs;  // post-activation, one per layer

  const Eigen::MatrixXd& output() const { return outputs.back(); }
};

inline Eigen::MatrixXd forward_batch(const Mlp& mlp, const Eigen::MatrixXd& x,
                                     ForwardTrace* trace = nullptr) {
  if (mlp.layers.empty()) throw std::invalid_argument("mlp has no layers");
  if (x.rows() != mlp.input_dim())
    throw std::invalid_argument("rejected input: expected dimension " +
                                format_int(mlp.input_dim()) + ", got " + format_int(x.rows()));
  if (trace) {
    trace->input = x;
    trace->outputs.clear();
    trace->outputs.reserve(mlp.layers.size());
  }
  Eigen::MatrixXd current = x;
  for (const auto& layer : mlp.layers) {
    Eigen::MatrixXd s = (layer.weights * current).colwise() + layer.biases;
    current = detail::apply_activation(layer.activation, s);
    if (trace) trace->outputs.push_back(current);
  }
  return current;
}

inline Eigen::VectorXd forward(const Mlp& mlp, const Eigen::VectorXd& x) {
  return forward_batch(mlp, x);
}

struct MlpGradients {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
  Eigen::MatrixXd input;  // gradient with respect to the batch input

  static MlpGradients zero_like(const Mlp& mlp) {
    MlpGradients g;
    for (const auto& layer : mlp.layers) {
      g.weights.emplace_back(Eigen::MatrixXd::Zero(layer.weights.rows(), layer.weights.cols()));
      g.biases.emplace_back(Eigen::VectorXd::Zero(layer.biases.size()));
    }
    return g;
  }

  void accumulate(const MlpGradients& other) {
    for (std::size_t l = 0; l < weights.size(); ++l) {
      weights[l] += other.weights[l];
      biases[l] += other.biases[l];
    }
  }
};

// Exact reverse-mode gradients of sum_b <upstream_b, forward(x_b)>.
inline MlpGradients gradients_batch(const Mlp& mlp, const ForwardTrace& trace,
                                    const Eigen::MatrixXd& upstream) {
  if (upstream.rows() != mlp.output_dim() || upstream.cols() != trace.input.cols())
    throw std::invalid_argument("rejected upstream: expected " + format_int(mlp.output_dim()) +
                                "x" + format_int(trace.input.cols()) + ", got " +
                                format_int(upstream.rows()) + "x" + format_int(upstream.cols()));
  MlpGradients grads;
  grads.weights.resize(mlp.layers.size());
  grads.biases.resize(mlp.layers.size());

  Eigen::MatrixXd dy = upstream;
  for (std::size_t l = mlp.layers.size(); l-- > 0;) {
    const DenseLayer& layer = mlp.layers[l];
    Eigen::MatrixXd ds = detail::activation_backward(layer.activation, trace.outputs[l], dy);
    const Eigen::MatrixXd& layer_input = l == 0 ? trace.input : trace.outputs[l - 1];
    grads.weights[l] = ds * layer_input.transpose();
    grads.biases[l] = ds.rowwise().sum();
    dy = layer.weights.transpose() * ds;
  }
  grads.input = std::move(dy);
  return grads;
}

inline MlpGradients gradients(const Mlp& mlp, const Eigen::VectorXd& x,
                              const Eigen::VectorXd& upstream) {
  ForwardTrace trace;
  forward_batch(mlp, x, &trace);
  return gradients_batch(mlp, trace, upstream);
}

// ---------------------------------------------------------------------------
// RMSprop

struct RmspropConfig {
  double learning_rate = 1e-3;
  double decay = 0.9;
  double epsilon = 1e-8;
};

// p <- p - lr * g / sqrt(v + eps), with v the running mean of g^2.
inline void rmsprop_step(Eigen::Ref<Eigen::MatrixXd> params, const Eigen::MatrixXd& grads,
                         Eigen::Ref<Eigen::MatrixXd> mean_square, const RmspropConfig& cfg) {
  if (params.rows() != grads.rows() || params.cols() != grads.cols() ||
      params.rows() != mean_square.rows() || params.cols() != mean_square.cols())
    throw std::invalid_argument("rmsprop_step: parameter/gradient/state shape mismatch");
  mean_square = cfg.decay * mean_square.array() + (1.0 - cfg.decay) * grads.array().square();
  params.array() -= cfg.learning_rate * grads.array() / (mean_square.array() + cfg.epsilon).sqrt();
}

// Running mean-square state for one Mlp.
struct RmspropState {
  std::vector<Eigen::MatrixXd> weight_ms;
  std::vector<Eigen::MatrixXd> bias_ms;

  static RmspropState zero_like(const Mlp& mlp) {
    RmspropState s;
    for (const auto& layer : mlp.layers) {
      s.weight_ms.emplace_back(Eigen::MatrixXd::Zero(layer.weights.rows(), layer.weights.cols()));
      s.bias_ms.emplace_back(Eigen::MatrixXd::Zero(layer.biases.size(), 1));
    }
    return s;
  }
};

inline void apply_rmsprop(Mlp& mlp, const MlpGradients& grads, RmspropState& state,
                          const RmspropConfig& cfg) {
  if (grads.weights.size() != mlp.layers.size())
    throw std::invalid_argument("apply_rmsprop: gradient layer count mismatch");
  for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
    rmsprop_step(mlp.layers[l].weights, grads.weights[l], state.weight_ms[l], cfg);
    Eigen::MatrixXd bias_grad = grads.biases[l];
    Eigen::Map<Eigen::MatrixXd> bias_view(mlp.layers[l].biases.data(), mlp.layers[l].biases.size(), 1);
    rmsprop_step(bias_view, bias_grad, state.bias_ms[l], cfg);
  }
}

// ---------------------------------------------------------------------------
// Initialization

// Uniform on (-s, s) with s = sqrt(6 / (fan_in + fan_out)); biases start at 0.
inline DenseLayer make_layer(int in, int out, Activation activation, Rng& rng) {
  if (in < 1 || out < 1) throw std::invalid_argument("layer dimensions must be positive");
  DenseLayer layer;
  layer.weights.resize(out, in);
  double scale = std::sqrt(6.0 / static_cast<double>(in + out));
  for (Eigen::Index i = 0; i < out; ++i)
    for (Eigen::Index j = 0; j < in; ++j) layer.weights(i, j) = rng.uniform(-scale, scale);
  layer.biases = Eigen::VectorXd::Zero(out);
  layer.activation = activation;
  return layer;
}

inline Mlp make_mlp(int in, const std::vector<int>& hidden, int out, Activation hidden_activation,
                    Activation final_activation, Rng& rng) {
  Mlp mlp;
  int current = in;
  for (int width : hidden) {
    mlp.layers.push_back(make_layer(current, width, hidden_activation, rng));
    current = width;
  }
  mlp.layers.push_back(make_layer(current, out, final_activation, rng));
  mlp.validate();
  return mlp;
}

// Visit every scalar parameter (weights then biases, layer by layer).
template <typename F>
void visit_params(Mlp& mlp, F&& f) {
  for (auto& layer : mlp.layers) {
    for (Eigen::Index i = 0; i < layer.weights.rows(); ++i)
      for (Eigen::Index j = 0; j < layer.weights.cols(); ++j) f(layer.weights(i, j));
    for (Eigen::Index i = 0; i < layer.biases.size(); ++i) f(layer.biases(i));
  }
}

inline std::size_t param_count(const Mlp& mlp) {
  std::size_t n = 0;
  for (const auto& layer : mlp.layers)
    n += static_cast<std::size_t>(layer.weights.size() + layer.biases.size());
  return n;
}

// ---------------------------------------------------------------------------
// Serialization: per-layer shape header followed by row-major decimal values.
// Numbers are written in shortest round-trip form, so load(save(m)) == m.

inline void serialize_mlp(const Mlp& mlp, std::string& out) {
  out += "mlp " + format_int(mlp.layers.size()) + "\n";
  for (const auto& layer : mlp.layers) {
    out += "layer " + format_int(layer.output_dim()) + " " + format_int(layer.input_dim()) +
           " " + activation_name(layer.activation) + "\n";
    for (Eigen::Index i = 0; i < layer.weights.rows(); ++i) {
      for (Eigen::Index j = 0; j < layer.weights.cols(); ++j) {
        if (j) out += ' ';
        out += format_double(layer.weights(i, j));
      }
      out += '\n';
    }
    for (Eigen::Index i = 0; i < layer.biases.size(); ++i) {
      if (i) out += ' ';
      out += format_double(layer.biases(i));
    }
    out += '\n';
  }
}

inline std::string serialize_mlp(const Mlp& mlp) {
  std::string out;
  serialize_mlp(mlp, out);
  return out;
}

// Sequential reader over lines of a text document.
class LineCursor {
 public:
  explicit LineCursor(std::string_view text) : lines_(split(text, '\n')) {}

  std::string next() {
    while (pos_ < lines_.size()) {
      auto line = trim(lines_[pos_++]);
      if (!line.empty()) return std::string(line);
    }
    throw std::invalid_argument("unexpected end of file");
  }

  bool done() {
    while (pos_ < lines_.size()) {
      if (!trim(lines_[pos_]).empty()) return false;
      ++pos_;
    }
    return true;
  }

 private:
  std::vector<std::string> lines_;
  std::size_t pos_ = 0;
};

inline Mlp parse_mlp(LineCursor& cursor) {
  auto header = split(cursor.next(), ' ');
  if (header.size() != 2 || header[0] != "mlp")
    throw std::invalid_argument("malformed mlp header");
  auto layer_count = parse_int(header[1]);
  Mlp mlp;
  for (std::int64_t l = 0; l < layer_count; ++l) {
    auto shape = split(cursor.next(), ' ');
    if (shape.size() != 4 || shape[0] != "layer")
      throw std::invalid_argument("malformed layer header");
    auto out_dim = parse_int(shape[1]);
    auto in_dim = parse_int(shape[2]);
    DenseLayer layer;
    layer.activation = activation_from_name(shape[3]);
    layer.weights.resize(out_dim, in_dim);
    for (std::int64_t i = 0; i < out_dim; ++i) {
      auto cells = split(cursor.next(), ' ');
      if (cells.size() != static_cast<std::size_t>(in_dim))
        throw std::invalid_argument("weight row has wrong length");
      for (std::int64_t j = 0; j < in_dim; ++j)
        layer.weights(i, j) = parse_double(cells[static_cast<std::size_t>(j)]);
    }
    auto bias_cells = split(cursor.next(), ' ');
    if (bias_cells.size() != static_cast<std::size_t>(out_dim))
      throw std::invalid_argument("bias row has wrong length");
    layer.biases.resize(out_dim);
    for (std::int64_t i = 0; i < out_dim; ++i)
      layer.biases(i) = parse_double(bias_cells[static_cast<std::size_t>(i)]);
    mlp.layers.push_back(std::move(layer));
  }
  mlp.validate();
  return mlp;
}

inline Mlp parse_mlp(std::string_view text) {
  LineCursor cursor(text);
  return parse_mlp(cursor);
}

}  // namespace atlasnerve
