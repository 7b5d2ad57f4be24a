#pragma once

// Adversarial training of an atlas model. Each step runs three phases in
// order on one mini-batch:
//   (a) encoders + decoders + membership descend the weighted
//       reconstruction error;
//   (b) a fresh prior sample is drawn and the discriminators descend the
//       negated two-term classification objective;
//   (c) encoders + membership descend the negated confusion objective, with
//       discriminator parameters frozen.
// Every loss below is written so that smaller is better; the classical
// saddle-point values for a blind discriminator (output 1/2 everywhere) are
// log 4 for phase (b) and log 2 for phase (c).
//
// Log arguments are clamped to [1e-7, 1-1e-7]; the clamp is part of the loss
// definition, so analytic gradients are exact derivatives of the reported
// numbers (zero in the clamped region).

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <vector>

#include "atlasnerve/atlas.hpp"
#include "atlasnerve/io.hpp"
#include "atlasnerve/manifolds.hpp"
#include "atlasnerve/nn.hpp"
#include "atlasnerve/rng.hpp"

namespace atlasnerve {

struct LossConfig {
  int batch_size = 128;
  double learning_rate = 1e-3;
  int epochs = 100;
  double rmsprop_decay = 0.9;
  double rmsprop_epsilon = 1e-8;
  int discriminator_steps = 1;  // phase (b) repeats per batch
  int generator_steps = 1;      // phase (c) repeats per batch

  void validate() const {
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (epochs < 0) throw std::invalid_argument("epochs must be >= 0");
    if (discriminator_steps < 1 || generator_steps < 1)
      throw std::invalid_argument("per-batch step counts must be >= 1");
  }

  RmspropConfig optimizer() const { return {learning_rate, rmsprop_decay, rmsprop_epsilon}; }
};

struct LossHistory {
  std::vector<double> reconstruction;
  std::vector<double> discriminator;
  std::vector<double> generator;

  std::size_t epochs() const { return reconstruction.size(); }

  std::string to_csv() const {
    CsvBuilder csv({"epoch", "recon_loss", "disc_loss", "gen_loss"});
    for (std::size_t e = 0; e < epochs(); ++e)
      csv.row({format_int(static_cast<std::int64_t>(e) + 1), format_double(reconstruction[e]),
               format_double(discriminator[e]), format_double(generator[e])});
    return csv.str();
  }
};

struct PriorSample {
  int chart = 1;
  Eigen::VectorXd z;
};

inline std::vector<PriorSample> sample_prior(const LatentPrior& prior, Eigen::Index count,
                                             Rng& rng) {
  std::vector<PriorSample> samples;
  samples.reserve(static_cast<std::size_t>(count));
  for (Eigen::Index i = 0; i < count; ++i) {
    auto [chart, z] = prior.sample(rng);
    samples.push_back({chart, std::move(z)});
  }
  return samples;
}

namespace detail {

constexpr double kLogFloor = 1e-7;

inline double clamped_log(double p) {
  return std::log(std::clamp(p, kLogFloor, 1.0 - kLogFloor));
}

// Derivative factor of clamped_log: 1/p inside the active region, else 0.
inline double clamped_log_slope(double p) {
  return (p > kLogFloor && p < 1.0 - kLogFloor) ? 1.0 / p : 0.0;
}

inline void check_batch(const AtlasModel& model, const Eigen::MatrixXd& batch) {
  if (batch.cols() == 0) throw std::invalid_argument("empty batch");
  if (batch.rows() != model.config.ambient_dim)
    throw std::invalid_argument("batch dimension " + format_int(batch.rows()) +
                                " does not match model ambient dimension " +
                                format_int(model.config.ambient_dim));
}

}  // namespace detail

// Gradients for the subset of networks one phase trains; absent entries mean
// the phase leaves that network untouched.
struct AtlasGradients {
  std::optional<MlpGradients> trunk;
  std::vector<MlpGradients> encoders;
  std::vector<MlpGradients> decoders;
  std::optional<MlpGradients> membership;
  std::vector<MlpGradients> discriminators;
};

// ---------------------------------------------------------------------------
// Loss values (pure functions of model and batch, model coordinates).

// (1/B) sum_b sum_j q(j|x_b) |x_b - phi_j(psi_j(x_b))|^2
inline double reconstruction_loss(const AtlasModel& model, const Eigen::MatrixXd& batch) {
  detail::check_batch(model, batch);
  const double inv_b = 1.0 / static_cast<double>(batch.cols());
  Eigen::MatrixXd trunk_out = detail::encoder_input_batch(model, batch);
  Eigen::MatrixXd q = forward_batch(model.membership_net, trunk_out);
  double loss = 0.0;
  for (int j = 0; j < model.config.chart_count; ++j) {
    Eigen::MatrixXd z = forward_batch(model.encoders[static_cast<std::size_t>(j)], trunk_out);
    Eigen::MatrixXd rec = forward_batch(model.decoders[static_cast<std::size_t>(j)], z);
    Eigen::RowVectorXd err = (rec - batch).colwise().squaredNorm();
    loss += inv_b * err.dot(q.row(j));
  }
  return loss;
}

// Negation of the discriminator objective: the classifier maximizes
//   (1/M) sum_m log D(z_m, j_m) + (1/B) sum_b sum_j q(j|x_b) log(1 - D_j(psi_j(x_b)))
// and this function returns its negative so training minimizes it.
inline double discriminator_loss(const AtlasModel& model, const Eigen::MatrixXd& batch,
                                 const std::vector<PriorSample>& prior_samples) {
  detail::check_batch(model, batch);
  if (prior_samples.empty()) throw std::invalid_argument("empty prior sample set");

  double prior_term = 0.0;
  for (const auto& sample : prior_samples)
    prior_term += detail::clamped_log(discriminate(model, sample.chart, sample.z));
  prior_term /= static_cast<double>(prior_samples.size());

  const double inv_b = 1.0 / static_cast<double>(batch.cols());
  Eigen::MatrixXd trunk_out = detail::encoder_input_batch(model, batch);
  Eigen::MatrixXd q = forward_batch(model.membership_net, trunk_out);
  double data_term = 0.0;
  for (int j = 0; j < model.config.chart_count; ++j) {
    Eigen::MatrixXd z = forward_batch(model.encoders[static_cast<std::size_t>(j)], trunk_out);
    Eigen::MatrixXd p = forward_batch(model.discriminators[static_cast<std::size_t>(j)], z);
    for (Eigen::Index b = 0; b < batch.cols(); ++b)
      data_term += inv_b * q(j, b) * detail::clamped_log(1.0 - p(0, b));
  }
  return -(prior_term + data_term);
}

// Negation of the confusion objective the encoders maximize:
//   (1/B) sum_b sum_j q(j|x_b) log D_j(psi_j(x_b)).
inline double generator_loss(const AtlasModel& model, const Eigen::MatrixXd& batch) {
  detail::check_batch(model, batch);
  const double inv_b = 1.0 / static_cast<double>(batch.cols());
  Eigen::MatrixXd trunk_out = detail::encoder_input_batch(model, batch);
  Eigen::MatrixXd q = forward_batch(model.membership_net, trunk_out);
  double loss = 0.0;
  for (int j = 0; j < model.config.chart_count; ++j) {
    Eigen::MatrixXd z = forward_batch(model.encoders[static_cast<std::size_t>(j)], trunk_out);
    Eigen::MatrixXd p = forward_batch(model.discriminators[static_cast<std::size_t>(j)], z);
    for (Eigen::Index b = 0; b < batch.cols(); ++b)
      loss -= inv_b * q(j, b) * detail::clamped_log(p(0, b));
  }
  return loss;
}

// ---------------------------------------------------------------------------
// Phase gradients. Each returns the loss value from the same forward pass.

inline double reconstruction_gradients(const AtlasModel& model, const Eigen::MatrixXd& batch,
                                       AtlasGradients& grads) {
  detail::check_batch(model, batch);
  const auto k = static_cast<std::size_t>(model.config.chart_count);
  const double inv_b = 1.0 / static_cast<double>(batch.cols());

  ForwardTrace trunk_trace;
  Eigen::MatrixXd trunk_out =
      model.trunk ? forward_batch(*model.trunk, batch, &trunk_trace) : batch;
  ForwardTrace membership_trace;
  Eigen::MatrixXd q = forward_batch(model.membership_net, trunk_out, &membership_trace);

  Eigen::MatrixXd trunk_upstream;
  if (model.trunk) trunk_upstream = Eigen::MatrixXd::Zero(trunk_out.rows(), trunk_out.cols());
  Eigen::MatrixXd membership_upstream(q.rows(), q.cols());

  double loss = 0.0;
  grads.encoders.resize(k);
  grads.decoders.resize(k);
  for (std::size_t j = 0; j < k; ++j) {
    ForwardTrace encoder_trace, decoder_trace;
    Eigen::MatrixXd z = forward_batch(model.encoders[j], trunk_out, &encoder_trace);
    Eigen::MatrixXd rec = forward_batch(model.decoders[j], z, &decoder_trace);
    Eigen::MatrixXd residual = rec - batch;
    Eigen::RowVectorXd err = residual.colwise().squaredNorm();
    loss += inv_b * err.dot(q.row(static_cast<Eigen::Index>(j)));
    membership_upstream.row(static_cast<Eigen::Index>(j)) = inv_b * err;

    Eigen::MatrixXd rec_upstream =
        (2.0 * inv_b) *
        (residual.array().rowwise() * q.row(static_cast<Eigen::Index>(j)).array()).matrix();
    grads.decoders[j] = gradients_batch(model.decoders[j], decoder_trace, rec_upstream);
    grads.encoders[j] = gradients_batch(model.encoders[j], encoder_trace, grads.decoders[j].input);
    if (model.trunk) trunk_upstream += grads.encoders[j].input;
  }

  grads.membership = gradients_batch(model.membership_net, membership_trace, membership_upstream);
  if (model.trunk) {
    trunk_upstream += grads.membership->input;
    grads.trunk = gradients_batch(*model.trunk, trunk_trace, trunk_upstream);
  }
  return loss;
}

inline double discriminator_gradients(const AtlasModel& model, const Eigen::MatrixXd& batch,
                                      const std::vector<PriorSample>& prior_samples,
                                      AtlasGradients& grads) {
  detail::check_batch(model, batch);
  if (prior_samples.empty()) throw std::invalid_argument("empty prior sample set");
  const auto k = static_cast<std::size_t>(model.config.chart_count);
  const double inv_b = 1.0 / static_cast<double>(batch.cols());
  const double inv_m = 1.0 / static_cast<double>(prior_samples.size());

  // Encoded batch and membership are constants in this phase.
  Eigen::MatrixXd trunk_out = detail::encoder_input_batch(model, batch);
  Eigen::MatrixXd q = forward_batch(model.membership_net, trunk_out);

  // Group prior latents by their chart label.
  std::vector<std::vector<Eigen::Index>> by_chart(k);
  for (std::size_t s = 0; s < prior_samples.size(); ++s) {
    const auto& sample = prior_samples[s];
    model.check_chart(sample.chart);
    by_chart[static_cast<std::size_t>(sample.chart - 1)].push_back(
        static_cast<Eigen::Index>(s));
  }

  double loss = 0.0;
  grads.discriminators.resize(k);
  for (std::size_t j = 0; j < k; ++j) {
    auto& disc = model.discriminators[j];
    grads.discriminators[j] = MlpGradients::zero_like(disc);

    if (!by_chart[j].empty()) {
      Eigen::MatrixXd prior_z(model.config.latent_dim, by_chart[j].size());
      for (std::size_t c = 0; c < by_chart[j].size(); ++c)
        prior_z.col(static_cast<Eigen::Index>(c)) =
            prior_samples[static_cast<std::size_t>(by_chart[j][c])].z;
      ForwardTrace trace;
      Eigen::MatrixXd p = forward_batch(disc, prior_z, &trace);
      Eigen::MatrixXd upstream(1, p.cols());
      for (Eigen::Index c = 0; c < p.cols(); ++c) {
        loss -= inv_m * detail::clamped_log(p(0, c));
        upstream(0, c) = -inv_m * detail::clamped_log_slope(p(0, c));
      }
      grads.discriminators[j].accumulate(gradients_batch(disc, trace, upstream));
    }

    Eigen::MatrixXd z = forward_batch(model.encoders[j], trunk_out);
    ForwardTrace trace;
    Eigen::MatrixXd p = forward_batch(disc, z, &trace);
    Eigen::MatrixXd upstream(1, p.cols());
    for (Eigen::Index b = 0; b < p.cols(); ++b) {
      double miss = 1.0 - p(0, b);
      loss -= inv_b * q(static_cast<Eigen::Index>(j), b) * detail::clamped_log(miss);
      upstream(0, b) =
          inv_b * q(static_cast<Eigen::Index>(j), b) * detail::clamped_log_slope(miss);
    }
    grads.discriminators[j].accumulate(gradients_batch(disc, trace, upstream));
  }
  return loss;
}

inline double generator_gradients(const AtlasModel& model, const Eigen::MatrixXd& batch,
                                  AtlasGradients& grads) {
  detail::check_batch(model, batch);
  const auto k = static_cast<std::size_t>(model.config.chart_count);
  const double inv_b = 1.0 / static_cast<double>(batch.cols());

  ForwardTrace trunk_trace;
  Eigen::MatrixXd trunk_out =
      model.trunk ? forward_batch(*model.trunk, batch, &trunk_trace) : batch;
  ForwardTrace membership_trace;
  Eigen::MatrixXd q = forward_batch(model.membership_net, trunk_out, &membership_trace);

  Eigen::MatrixXd trunk_upstream;
  if (model.trunk) trunk_upstream = Eigen::MatrixXd::Zero(trunk_out.rows(), trunk_out.cols());
  Eigen::MatrixXd membership_upstream(q.rows(), q.cols());

  double loss = 0.0;
  grads.encoders.resize(k);
  for (std::size_t j = 0; j < k; ++j) {
    ForwardTrace encoder_trace, disc_trace;
    Eigen::MatrixXd z = forward_batch(model.encoders[j], trunk_out, &encoder_trace);
    Eigen::MatrixXd p = forward_batch(model.discriminators[j], z, &disc_trace);

    Eigen::MatrixXd disc_upstream(1, p.cols());
    for (Eigen::Index b = 0; b < p.cols(); ++b) {
      double value = detail::clamped_log(p(0, b));
      loss -= inv_b * q(static_cast<Eigen::Index>(j), b) * value;
      membership_upstream(static_cast<Eigen::Index>(j), b) = -inv_b * value;
      disc_upstream(0, b) = -inv_b * q(static_cast<Eigen::Index>(j), b) *
                            detail::clamped_log_slope(p(0, b));
    }
    // Discriminator parameters stay frozen; only its input gradient flows
    // back into the encoder.
    MlpGradients through_disc =
        gradients_batch(model.discriminators[j], disc_trace, disc_upstream);
    grads.encoders[j] = gradients_batch(model.encoders[j], encoder_trace, through_disc.input);
    if (model.trunk) trunk_upstream += grads.encoders[j].input;
  }

  grads.membership = gradients_batch(model.membership_net, membership_trace, membership_upstream);
  if (model.trunk) {
    trunk_upstream += grads.membership->input;
    grads.trunk = gradients_batch(*model.trunk, trunk_trace, trunk_upstream);
  }
  return loss;
}

// ---------------------------------------------------------------------------
// Optimizer state and the per-batch step.

struct TrainerState {
  std::optional<RmspropState> trunk;
  std::vector<RmspropState> encoders;
  std::vector<RmspropState> decoders;
  RmspropState membership;
  std::vector<RmspropState> discriminators;
  RmspropConfig optimizer;

  static TrainerState make(const AtlasModel& model, const LossConfig& cfg) {
    TrainerState state;
    if (model.trunk) state.trunk = RmspropState::zero_like(*model.trunk);
    for (const auto& net : model.encoders) state.encoders.push_back(RmspropState::zero_like(net));
    for (const auto& net : model.decoders) state.decoders.push_back(RmspropState::zero_like(net));
    state.membership = RmspropState::zero_like(model.membership_net);
    for (const auto& net : model.discriminators)
      state.discriminators.push_back(RmspropState::zero_like(net));
    state.optimizer = cfg.optimizer();
    return state;
  }
};

struct StepLosses {
  double reconstruction = 0.0;
  double discriminator = 0.0;
  double generator = 0.0;
};

// One mini-batch update: phases (a), (b), (c) in order. Reported losses are
// the values seen before each phase's own update.
inline StepLosses train_step(AtlasModel& model, const Eigen::MatrixXd& batch,
                             TrainerState& state, const LossConfig& cfg, Rng& rng) {
  detail::check_batch(model, batch);
  StepLosses losses;

  {
    AtlasGradients grads;
    losses.reconstruction = reconstruction_gradients(model, batch, grads);
    for (std::size_t j = 0; j < model.encoders.size(); ++j) {
      apply_rmsprop(model.encoders[j], grads.encoders[j], state.encoders[j], state.optimizer);
      apply_rmsprop(model.decoders[j], grads.decoders[j], state.decoders[j], state.optimizer);
    }
    apply_rmsprop(model.membership_net, *grads.membership, state.membership, state.optimizer);
    if (model.trunk) apply_rmsprop(*model.trunk, *grads.trunk, *state.trunk, state.optimizer);
  }

  for (int repeat = 0; repeat < cfg.discriminator_steps; ++repeat) {
    auto prior_samples = sample_prior(model.prior(), batch.cols(), rng);
    AtlasGradients grads;
    double value = discriminator_gradients(model, batch, prior_samples, grads);
    if (repeat == 0) losses.discriminator = value;
    for (std::size_t j = 0; j < model.discriminators.size(); ++j)
      apply_rmsprop(model.discriminators[j], grads.discriminators[j], state.discriminators[j],
                    state.optimizer);
  }

  for (int repeat = 0; repeat < cfg.generator_steps; ++repeat) {
    AtlasGradients grads;
    double value = generator_gradients(model, batch, grads);
    if (repeat == 0) losses.generator = value;
    for (std::size_t j = 0; j < model.encoders.size(); ++j)
      apply_rmsprop(model.encoders[j], grads.encoders[j], state.encoders[j], state.optimizer);
    apply_rmsprop(model.membership_net, *grads.membership, state.membership, state.optimizer);
    if (model.trunk) apply_rmsprop(*model.trunk, *grads.trunk, *state.trunk, state.optimizer);
  }

  return losses;
}

// Epoch loop: seeded shuffle, mini-batches in order, per-epoch mean losses.
inline LossHistory fit(AtlasModel& model, const PointCloud& data, const LossConfig& cfg,
                       Rng& rng) {
  cfg.validate();
  if (data.count() < 1) throw std::invalid_argument("fit: empty dataset");
  if (data.dims() != model.config.ambient_dim)
    throw std::invalid_argument("fit: data dimension " + format_int(data.dims()) +
                                " does not match model ambient dimension " +
                                format_int(model.config.ambient_dim));

  TrainerState state = TrainerState::make(model, cfg);
  LossHistory history;
  std::vector<Eigen::Index> order(static_cast<std::size_t>(data.count()));
  for (Eigen::Index i = 0; i < data.count(); ++i) order[static_cast<std::size_t>(i)] = i;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double recon_sum = 0.0, disc_sum = 0.0, gen_sum = 0.0;
    int batches = 0;
    for (Eigen::Index start = 0; start < data.count(); start += cfg.batch_size) {
      Eigen::Index size = std::min<Eigen::Index>(cfg.batch_size, data.count() - start);
      Eigen::MatrixXd batch(data.dims(), size);
      for (Eigen::Index c = 0; c < size; ++c)
        batch.col(c) = data.points.row(order[static_cast<std::size_t>(start + c)]).transpose();
      StepLosses losses = train_step(model, batch, state, cfg, rng);
      recon_sum += losses.reconstruction;
      disc_sum += losses.discriminator;
      gen_sum += losses.generator;
      ++batches;
    }
    history.reconstruction.push_back(recon_sum / batches);
    history.discriminator.push_back(disc_sum / batches);
    history.generator.push_back(gen_sum / batches);
  }
  return history;
}

// One training run per latent dimension, identical in everything else.
inline std::map<int, LossHistory> dimension_sweep(const PointCloud& data,
                                                  const std::vector<int>& d_values,
                                                  const AtlasConfig& base_config,
                                                  const LossConfig& loss_config,
                                                  std::uint64_t train_seed) {
  if (d_values.empty()) throw std::invalid_argument("dimension_sweep: no d values");
  std::map<int, LossHistory> result;
  for (int d : d_values) {
    if (d < 1 || d > base_config.ambient_dim)
      throw std::invalid_argument("dimension_sweep: invalid latent dimension " + format_int(d));
    AtlasConfig cfg = base_config;
    cfg.latent_dim = d;
    AtlasModel model = make_atlas(cfg);
    Rng rng(train_seed);
    result[d] = fit(model, data, loss_config, rng);
  }
  return result;
}

}  // namespace atlasnerve
