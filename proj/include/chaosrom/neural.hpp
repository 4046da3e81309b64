#pragma once

// Autoencoder reduced order models with neural latent dynamics:
//   u = theta(x),  x~ = phi(u),  du/dt = f(u)
// where theta, phi and f are one-hidden-layer GELU networks. The constrained
// variant (SyCo-AE) projects the encoder output and every integrator step
// onto the unit sphere S^{r-1}.
//
// Training minimizes the mean rollout loss over trajectories by full-batch
// ADAM. All trajectories are stacked column-wise so the whole dataset moves
// through each network as one matrix; gradients come from a hand-written
// reverse pass over the fixed-step projected trapezoidal rollout.

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "chaosrom/errors.hpp"
#include "chaosrom/lorenz96.hpp"
#include "chaosrom/nn.hpp"
#include "chaosrom/ode.hpp"
#include "chaosrom/random.hpp"
#include "chaosrom/sphere.hpp"

namespace chaosrom {

struct NeuralRom {
  MlpParams encoder;   // n -> r
  MlpParams decoder;   // r -> n
  MlpParams dynamics;  // r -> r
  bool constrained = true;
  double lambda = kLargestLyapunovExponent;
  double omega = 100.0;
  double upsilon = 1.0;

  Eigen::Index rank() const { return encoder.output_dim(); }
  Eigen::Index dimension() const { return encoder.input_dim(); }
  Eigen::Index parameter_count() const {
    return encoder.parameter_count() + decoder.parameter_count() + dynamics.parameter_count();
  }

  void validate() const {
    encoder.validate();
    decoder.validate();
    dynamics.validate();
    const Eigen::Index n = encoder.input_dim(), r = encoder.output_dim();
    if (decoder.input_dim() != r || decoder.output_dim() != n || dynamics.input_dim() != r ||
        dynamics.output_dim() != r) {
      throw DimensionError("encoder, decoder and dynamics shapes disagree");
    }
    if (!(lambda >= 0) || !(omega >= 0) || !(upsilon >= 0)) {
      throw ConfigError("lambda, omega and upsilon must be >= 0");
    }
  }
};

struct NeuralHyper {
  Eigen::Index r = 28;
  Eigen::Index hidden = 2000;
  bool constrained = true;
  double lambda = kLargestLyapunovExponent;
  double omega = 100.0;
  double upsilon = 1.0;
};

struct TrainConfig {
  int epochs = 1000;
  int rollout = 1;
  int substeps_per_interval = 5;
  double beta1 = 0.9;
  double beta2 = 0.95;
  double epsilon = 1e-8;
  CyclicLrSchedule schedule{};
  std::uint64_t seed = 0;

  void validate() const {
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (rollout < 1) throw ConfigError("rollout K must be >= 1");
    if (substeps_per_interval < 1) throw ConfigError("substeps_per_interval must be >= 1");
    if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1)) {
      throw ConfigError("ADAM betas must lie in [0, 1)");
    }
    schedule.validate();
  }
};

// Same draw order for ae and syco, so equal seeds give equal initial weights.
inline NeuralRom init_neural_rom(Eigen::Index n, const NeuralHyper& hyper, std::uint64_t seed) {
  if (n < 1 || hyper.r < 1 || hyper.hidden < 1) throw ConfigError("network sizes must be >= 1");
  std::mt19937_64 gen(seed);
  NeuralRom model;
  model.encoder = init_glorot(n, hyper.hidden, hyper.r, gen);
  model.decoder = init_glorot(hyper.r, hyper.hidden, n, gen);
  model.dynamics = init_glorot(hyper.r, hyper.hidden, hyper.r, gen);
  model.constrained = hyper.constrained;
  model.lambda = hyper.lambda;
  model.omega = hyper.omega;
  model.upsilon = hyper.upsilon;
  model.validate();
  return model;
}

inline Eigen::VectorXd encode(const NeuralRom& model, const StateVector& x) {
  Eigen::VectorXd u = mlp_forward(model.encoder, x);
  return model.constrained ? sphere_project(u) : u;
}

inline StateVector decode(const NeuralRom& model, const Eigen::VectorXd& u) {
  return mlp_forward(model.decoder, u);
}

struct NeuralField {
  const MlpParams* dynamics;
  Eigen::VectorXd operator()(const Eigen::VectorXd& u) const { return mlp_forward(*dynamics, u); }
};

enum class AdvanceMode { fixed, adaptive };

inline void check_on_sphere(const NeuralRom& model, const Eigen::VectorXd& u) {
  if (model.constrained && !(std::abs(u.norm() - 1.0) <= 1e-9)) {
    throw ConfigError("constrained model needs a latent state on the unit sphere");
  }
}

inline Eigen::VectorXd advance(const NeuralRom& model, const Eigen::VectorXd& u0, double dt,
                               AdvanceMode mode, int substeps = 5,
                               const SolverConfig& solver = SolverConfig{}) {
  if (u0.size() != model.rank()) throw DimensionError("latent length does not match the model");
  check_on_sphere(model, u0);
  if (dt == 0) return u0;
  const NeuralField field{&model.dynamics};
  if (mode == AdvanceMode::fixed) {
    const double h = dt / substeps;
    return model.constrained
               ? integrate_fixed(field, u0, static_cast<std::size_t>(substeps), h, SphereProjection{})
               : integrate_fixed(field, u0, static_cast<std::size_t>(substeps), h);
  }
  return model.constrained ? integrate_adaptive(field, u0, 0.0, dt, solver, SphereProjection{})
                           : integrate_adaptive(field, u0, 0.0, dt, solver);
}

// ---------------------------------------------------------------------------
// Rollout loss

// Trajectories of equal length and equal relative sample times, stacked so that
// column b of states[k] is X_k of trajectory b.
struct TrajectoryBatch {
  std::vector<Eigen::MatrixXd> states;  // K+1 matrices, n x B
  std::vector<double> offsets;          // t_k - t_0

  Eigen::Index batch_size() const { return states.empty() ? 0 : states.front().cols(); }
  int rollout() const { return static_cast<int>(states.size()) - 1; }
};

inline TrajectoryBatch make_batch(const std::vector<Trajectory>& trajectories) {
  if (trajectories.empty()) throw ConfigError("no trajectories to train on");
  const auto& first = trajectories.front();
  first.validate();
  const std::size_t len = first.size();
  if (len < 2) throw ConfigError("training trajectories need K+1 >= 2 points");
  const Eigen::Index n = first.dimension();
  const auto B = static_cast<Eigen::Index>(trajectories.size());

  TrajectoryBatch batch;
  for (std::size_t k = 0; k < len; ++k) batch.offsets.push_back(first.times[k] - first.times[0]);
  const double h = batch.offsets[1];
  for (std::size_t k = 1; k < len; ++k) {
    if (std::abs((batch.offsets[k] - batch.offsets[k - 1]) - h) > 1e-9 * std::max(1.0, h)) {
      throw ConfigError("training trajectories need uniform spacing");
    }
  }
  batch.states.assign(len, Eigen::MatrixXd(n, B));
  for (Eigen::Index b = 0; b < B; ++b) {
    const auto& traj = trajectories[static_cast<std::size_t>(b)];
    if (traj.size() != len) throw ConfigError("all trajectories must have K+1 points");
    for (std::size_t k = 0; k < len; ++k) {
      if (std::abs((traj.times[k] - traj.times[0]) - batch.offsets[k]) >
          1e-9 * std::max(1.0, batch.offsets[k])) {
        throw ConfigError("all trajectories must share the same sample spacing");
      }
      if (traj.states[k].size() != n) throw DimensionError("state length differs across data");
      batch.states[k].col(b) = traj.states[k];
    }
  }
  return batch;
}

// Each term as it enters the total (weights included), averaged over trajectories.
struct LossTerms {
  double autoencoder = 0.0;
  double right_inverse = 0.0;
  double full_dynamics = 0.0;
  double latent_dynamics = 0.0;

  double total() const { return autoencoder + right_inverse + full_dynamics + latent_dynamics; }
};

struct NeuralGradient {
  MlpParams encoder;
  MlpParams decoder;
  MlpParams dynamics;

  static NeuralGradient zeros_like(const NeuralRom& m) {
    return {MlpParams::zeros(m.encoder.input_dim(), m.encoder.hidden_dim(), m.encoder.output_dim()),
            MlpParams::zeros(m.decoder.input_dim(), m.decoder.hidden_dim(), m.decoder.output_dim()),
            MlpParams::zeros(m.dynamics.input_dim(), m.dynamics.hidden_dim(),
                             m.dynamics.output_dim())};
  }
};

inline Eigen::VectorXd flatten(const NeuralRom& m) {
  Eigen::VectorXd flat(m.parameter_count());
  flatten_into(m.encoder, flat, 0);
  flatten_into(m.decoder, flat, m.encoder.parameter_count());
  flatten_into(m.dynamics, flat, m.encoder.parameter_count() + m.decoder.parameter_count());
  return flat;
}

inline void unflatten(NeuralRom& m, const Eigen::VectorXd& flat) {
  unflatten_from(m.encoder, flat, 0);
  unflatten_from(m.decoder, flat, m.encoder.parameter_count());
  unflatten_from(m.dynamics, flat, m.encoder.parameter_count() + m.decoder.parameter_count());
}

inline Eigen::VectorXd flatten(const NeuralGradient& g) {
  const Eigen::Index ne = g.encoder.parameter_count(), nd = g.decoder.parameter_count();
  Eigen::VectorXd flat(ne + nd + g.dynamics.parameter_count());
  flatten_into(g.encoder, flat, 0);
  flatten_into(g.decoder, flat, ne);
  flatten_into(g.dynamics, flat, ne + nd);
  return flat;
}

namespace detail {

inline void require_finite(const Eigen::MatrixXd& m, const char* what) {
  if (!m.allFinite()) throw DivergenceError(std::string("non-finite values in ") + what, 0.0);
}

// Everything one projected trapezoidal substep needs for its reverse pass.
struct SubstepTape {
  Eigen::MatrixXd start;  // V
  Eigen::MatrixXd stage;  // V + k1
  Eigen::MatrixXd pre_projection;  // V + (k1 + k2)/2
  MlpTape f_start;
  MlpTape f_stage;
};

}  // namespace detail

// Mean over the batch of
//   sum_k |X_k - phi(theta(X_k))|^2 + omega sum_k |theta(X_k) - theta(phi(theta(X_k)))|^2
//   + sum_{k>=1} w_k |X_k - phi(M_k)|^2 + upsilon sum_{k>=1} w_k |theta(X_k) - M_k|^2
// with w_k = exp(-2 lambda (t_k - t_0)) and M_k the fixed-step projected
// rollout of theta(X_0). When grad is non-null the exact gradient is
// accumulated into it.
inline LossTerms rollout_loss_batch(const NeuralRom& model, const TrajectoryBatch& batch,
                                    int substeps_per_interval, NeuralGradient* grad = nullptr) {
  const int K = batch.rollout();
  const Eigen::Index B = batch.batch_size();
  if (K < 1) throw ConfigError("rollout loss needs K >= 1");
  if (substeps_per_interval < 1) throw ConfigError("substeps_per_interval must be >= 1");
  if (batch.states.front().rows() != model.dimension()) {
    throw DimensionError("data dimension does not match the model");
  }
  const double scale = 1.0 / static_cast<double>(B);
  const bool proj = model.constrained;
  auto project = [proj](Eigen::MatrixXd z) {
    if (proj) sphere_project_columns(z);
    return z;
  };
  auto pullback = [proj](const Eigen::MatrixXd& z, const Eigen::MatrixXd& dy) {
    return proj ? sphere_project_pullback_columns(z, dy) : dy;
  };

  const std::size_t len = batch.states.size();
  std::vector<Eigen::MatrixXd> Z(len), U(len), Xr(len), Z2(len), U2(len);
  std::vector<MlpTape> enc_tape(len), dec_tape(len), enc2_tape(len);
  LossTerms terms;

  for (std::size_t k = 0; k < len; ++k) {
    const Eigen::MatrixXd& X = batch.states[k];
    Z[k] = mlp_forward_batch(model.encoder, X, &enc_tape[k]);
    U[k] = project(Z[k]);
    Xr[k] = mlp_forward_batch(model.decoder, U[k], &dec_tape[k]);
    Z2[k] = mlp_forward_batch(model.encoder, Xr[k], &enc2_tape[k]);
    U2[k] = project(Z2[k]);
    terms.autoencoder += scale * (X - Xr[k]).squaredNorm();
    terms.right_inverse += scale * model.omega * (U[k] - U2[k]).squaredNorm();
  }
  detail::require_finite(Xr.back(), "the autoencoder");

  // Rollout with frozen step schedule.
  std::vector<std::vector<detail::SubstepTape>> steps(len);
  std::vector<Eigen::MatrixXd> M(len), Xd(len);
  std::vector<MlpTape> rollout_dec_tape(len);
  std::vector<double> weight(len, 1.0);
  Eigen::MatrixXd V = U[0];
  for (std::size_t k = 1; k < len; ++k) {
    const double h = (batch.offsets[k] - batch.offsets[k - 1]) / substeps_per_interval;
    weight[k] = std::exp(-2.0 * model.lambda * batch.offsets[k]);
    for (int s = 0; s < substeps_per_interval; ++s) {
      detail::SubstepTape tape;
      tape.start = V;
      const Eigen::MatrixXd k1 = h * mlp_forward_batch(model.dynamics, V, &tape.f_start);
      tape.stage = V + k1;
      const Eigen::MatrixXd k2 = h * mlp_forward_batch(model.dynamics, tape.stage, &tape.f_stage);
      tape.pre_projection = V + 0.5 * (k1 + k2);
      V = project(tape.pre_projection);
      detail::require_finite(V, "the latent rollout");
      steps[k].push_back(std::move(tape));
    }
    M[k] = V;
    Xd[k] = mlp_forward_batch(model.decoder, M[k], &rollout_dec_tape[k]);
    terms.full_dynamics += scale * weight[k] * (batch.states[k] - Xd[k]).squaredNorm();
    terms.latent_dynamics += scale * model.upsilon * weight[k] * (U[k] - M[k]).squaredNorm();
  }
  if (!std::isfinite(terms.total())) throw DivergenceError("rollout loss is not finite", 0.0);
  if (!grad) return terms;

  std::vector<Eigen::MatrixXd> dU(len);
  for (std::size_t k = 0; k < len; ++k) dU[k] = Eigen::MatrixXd::Zero(U[k].rows(), B);

  // Reverse through the rollout, latest interval first.
  Eigen::MatrixXd dV = Eigen::MatrixXd::Zero(U[0].rows(), B);
  for (std::size_t k = len - 1; k >= 1; --k) {
    const Eigen::MatrixXd d_full = 2.0 * scale * weight[k] * (Xd[k] - batch.states[k]);
    dV += mlp_backward_batch(model.decoder, M[k], rollout_dec_tape[k], d_full, grad->decoder);
    const Eigen::MatrixXd d_lat = 2.0 * scale * model.upsilon * weight[k] * (M[k] - U[k]);
    dV += d_lat;
    dU[k] -= d_lat;
    const double h = (batch.offsets[k] - batch.offsets[k - 1]) / substeps_per_interval;
    for (auto it = steps[k].rbegin(); it != steps[k].rend(); ++it) {
      const Eigen::MatrixXd dW = pullback(it->pre_projection, dV);
      Eigen::MatrixXd dk1 = 0.5 * dW;
      const Eigen::MatrixXd dk2 = 0.5 * dW;
      dV = dW;
      const Eigen::MatrixXd d_stage =
          mlp_backward_batch(model.dynamics, it->stage, it->f_stage, h * dk2, grad->dynamics);
      dV += d_stage;
      dk1 += d_stage;
      dV += mlp_backward_batch(model.dynamics, it->start, it->f_start, h * dk1, grad->dynamics);
    }
  }
  dU[0] += dV;

  for (std::size_t k = 0; k < len; ++k) {
    const Eigen::MatrixXd& X = batch.states[k];
    const Eigen::MatrixXd dU2 = 2.0 * scale * model.omega * (U2[k] - U[k]);
    dU[k] -= dU2;
    Eigen::MatrixXd dXr = 2.0 * scale * (Xr[k] - X);
    dXr += mlp_backward_batch(model.encoder, Xr[k], enc2_tape[k], pullback(Z2[k], dU2), grad->encoder);
    dU[k] += mlp_backward_batch(model.decoder, U[k], dec_tape[k], dXr, grad->decoder);
    mlp_backward_batch(model.encoder, X, enc_tape[k], pullback(Z[k], dU[k]), grad->encoder);
  }
  return terms;
}

inline double rollout_loss(const NeuralRom& model, const Trajectory& traj,
                           const TrainConfig& cfg) {
  return rollout_loss_batch(model, make_batch({traj}), cfg.substeps_per_interval).total();
}

struct EpochLog {
  int epoch = 0;
  double lr = 0.0;
  LossTerms loss;
};

struct TrainResult {
  NeuralRom model;
  std::vector<EpochLog> log;
};

// Full-batch ADAM on the mean rollout loss. Each epoch logs the loss at the
// parameters it starts from, then takes one step.
inline TrainResult train(const std::vector<Trajectory>& dataset, const TrainConfig& cfg,
                         const NeuralHyper& hyper,
                         const std::function<void(const EpochLog&)>& on_epoch = {}) {
  cfg.validate();
  const TrajectoryBatch batch = make_batch(dataset);
  if (batch.rollout() != cfg.rollout) {
    throw ConfigError("trajectories have K=" + std::to_string(batch.rollout()) +
                      " but the config asks for K=" + std::to_string(cfg.rollout));
  }
  TrainResult result{init_neural_rom(batch.states.front().rows(), hyper, cfg.seed), {}};
  NeuralRom& model = result.model;
  Eigen::VectorXd params = flatten(model);
  AdamState adam = AdamState::fresh(params.size(), cfg.beta1, cfg.beta2, cfg.epsilon);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    NeuralGradient grad = NeuralGradient::zeros_like(model);
    EpochLog entry;
    entry.epoch = epoch;
    entry.lr = cyclic_lr(cfg.schedule, epoch - 1);
    try {
      entry.loss = rollout_loss_batch(model, batch, cfg.substeps_per_interval, &grad);
    } catch (const DivergenceError& e) {
      throw DivergenceError("training diverged at epoch " + std::to_string(epoch) + ": " + e.what(),
                            e.time());
    }
    result.log.push_back(entry);
    if (on_epoch) on_epoch(entry);
    const Eigen::VectorXd g = flatten(grad);
    if (!g.allFinite()) {
      throw DivergenceError("training diverged at epoch " + std::to_string(epoch) +
                                ": non-finite gradient",
                            0.0);
    }
    adam_step(adam, params, g, entry.lr);
    unflatten(model, params);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Bounds on the decoded image of the sphere

// max over sampled unit vectors u of |phi(u)|_inf.
inline double sphere_image_bound(const MlpParams& decoder, std::size_t samples,
                                 std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  const Eigen::Index r = decoder.input_dim();
  constexpr std::size_t kChunk = 4096;
  double bound = 0.0;
  for (std::size_t done = 0; done < samples; done += kChunk) {
    const auto count = static_cast<Eigen::Index>(std::min(kChunk, samples - done));
    Eigen::MatrixXd U(r, count);
    for (Eigen::Index j = 0; j < count; ++j) U.col(j) = random_unit_vector(r, gen);
    bound = std::max(bound, mlp_forward_batch(decoder, U).cwiseAbs().maxCoeff());
  }
  return bound;
}

// Rigorous bound: over |u| = 1 each hidden pre-activation lies in
// [b1_i - |a1_i|, b1_i + |a1_i|], and gelu on an interval is extremal at the
// endpoints or at its global minimum.
inline double sphere_image_bound_interval(const MlpParams& decoder) {
  constexpr double kGeluArgMin = -0.7517916243848858;
  const double gelu_min = std::abs(gelu(kGeluArgMin));
  Eigen::VectorXd hidden_max(decoder.hidden_dim());
  for (Eigen::Index i = 0; i < decoder.hidden_dim(); ++i) {
    const double radius = decoder.A1.row(i).norm();
    const double lo = decoder.b1[i] - radius, hi = decoder.b1[i] + radius;
    double m = std::max(std::abs(gelu(lo)), std::abs(gelu(hi)));
    if (lo <= kGeluArgMin && kGeluArgMin <= hi) m = std::max(m, gelu_min);
    hidden_max[i] = m;
  }
  return (decoder.A2.cwiseAbs() * hidden_max + decoder.b2.cwiseAbs()).maxCoeff();
}

}  // namespace chaosrom
