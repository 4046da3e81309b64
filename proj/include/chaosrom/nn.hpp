#pragma once

// One-hidden-layer perceptron  y = A2 gelu(A1 x + b1) + b2  with exact
// reverse-mode gradients, plus the ADAM optimizer and a triangular cyclic
// learning-rate schedule.

#include <cmath>
#include <cstdint>
#include <random>
#include <string>

#include <Eigen/Dense>

#include "chaosrom/errors.hpp"
#include "chaosrom/random.hpp"

namespace chaosrom {

inline constexpr double kInvSqrt2 = 0.70710678118654752440;
inline constexpr double kInvSqrt2Pi = 0.39894228040143267794;

// Exact GELU x * Phi(x); erfc keeps the negative tail accurate.
inline double gelu(double x) { return 0.5 * x * std::erfc(-x * kInvSqrt2); }

inline double gelu_derivative(double x) {
  return 0.5 * std::erfc(-x * kInvSqrt2) + x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

struct MlpParams {
  Eigen::MatrixXd A1;  // H x d_in
  Eigen::VectorXd b1;  // H
  Eigen::MatrixXd A2;  // d_out x H
  Eigen::VectorXd b2;  // d_out

  Eigen::Index input_dim() const { return A1.cols(); }
  Eigen::Index hidden_dim() const { return A1.rows(); }
  Eigen::Index output_dim() const { return A2.rows(); }
  Eigen::Index parameter_count() const { return A1.size() + b1.size() + A2.size() + b2.size(); }

  static MlpParams zeros(Eigen::Index d_in, Eigen::Index hidden, Eigen::Index d_out) {
    return {Eigen::MatrixXd::Zero(hidden, d_in), Eigen::VectorXd::Zero(hidden),
            Eigen::MatrixXd::Zero(d_out, hidden), Eigen::VectorXd::Zero(d_out)};
  }

  void validate() const {
    if (b1.size() != A1.rows() || A2.cols() != A1.rows() || b2.size() != A2.rows()) {
      throw DimensionError("inconsistent MLP parameter shapes");
    }
    if (!A1.allFinite() || !b1.allFinite() || !A2.allFinite() || !b2.allFinite()) {
      throw InvalidModelError("MLP parameters must be finite");
    }
  }

  bool operator==(const MlpParams& o) const {
    return A1 == o.A1 && b1 == o.b1 && A2 == o.A2 && b2 == o.b2;
  }
};

// Glorot-uniform weights in +-sqrt(6/(fan_in+fan_out)), zero biases.
inline MlpParams init_glorot(Eigen::Index d_in, Eigen::Index hidden, Eigen::Index d_out,
                             std::mt19937_64& gen) {
  MlpParams p = MlpParams::zeros(d_in, hidden, d_out);
  auto fill = [&gen](Eigen::MatrixXd& m) {
    const double limit = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      for (Eigen::Index i = 0; i < m.rows(); ++i) {
        m(i, j) = limit * (2.0 * unit_uniform(gen) - 1.0);
      }
    }
  };
  fill(p.A1);
  fill(p.A2);
  return p;
}

// Hidden pre-activations kept from a forward pass for the backward pass.
struct MlpTape {
  Eigen::MatrixXd pre;  // H x batch
};

// Batched forward pass: every column of x is one input.
inline Eigen::MatrixXd mlp_forward_batch(const MlpParams& p, const Eigen::MatrixXd& x,
                                         MlpTape* tape = nullptr) {
  if (x.rows() != p.input_dim()) {
    throw DimensionError("MLP expects input of length " + std::to_string(p.input_dim()) +
                         ", got " + std::to_string(x.rows()));
  }
  Eigen::MatrixXd pre = p.A1 * x;
  pre.colwise() += p.b1;
  Eigen::MatrixXd y = p.A2 * pre.unaryExpr([](double v) { return gelu(v); });
  y.colwise() += p.b2;
  if (tape) tape->pre = std::move(pre);
  return y;
}

inline Eigen::VectorXd mlp_forward(const MlpParams& p, const Eigen::VectorXd& x) {
  return mlp_forward_batch(p, Eigen::MatrixXd(x)).col(0);
}

// Accumulates the parameter gradient of sum(upstream .* y) into grad and
// returns the input gradient.
inline Eigen::MatrixXd mlp_backward_batch(const MlpParams& p, const Eigen::MatrixXd& x,
                                          const MlpTape& tape, const Eigen::MatrixXd& upstream,
                                          MlpParams& grad) {
  if (upstream.rows() != p.output_dim() || upstream.cols() != x.cols()) {
    throw DimensionError("MLP upstream gradient has the wrong shape");
  }
  const Eigen::MatrixXd hidden = tape.pre.unaryExpr([](double v) { return gelu(v); });
  grad.A2.noalias() += upstream * hidden.transpose();
  grad.b2 += upstream.rowwise().sum();
  const Eigen::MatrixXd d_pre =
      (p.A2.transpose() * upstream).cwiseProduct(tape.pre.unaryExpr([](double v) {
        return gelu_derivative(v);
      }));
  grad.A1.noalias() += d_pre * x.transpose();
  grad.b1 += d_pre.rowwise().sum();
  return p.A1.transpose() * d_pre;
}

struct MlpGradient {
  MlpParams params;
  Eigen::VectorXd input;
};

inline MlpGradient mlp_backward(const MlpParams& p, const Eigen::VectorXd& x,
                                const Eigen::VectorXd& upstream) {
  if (x.size() != p.input_dim()) throw DimensionError("MLP input has the wrong length");
  if (upstream.size() != p.output_dim()) throw DimensionError("upstream has the wrong length");
  MlpTape tape;
  const Eigen::MatrixXd xm = x;
  mlp_forward_batch(p, xm, &tape);
  MlpGradient g{MlpParams::zeros(p.input_dim(), p.hidden_dim(), p.output_dim()), {}};
  g.input = mlp_backward_batch(p, xm, tape, Eigen::MatrixXd(upstream), g.params).col(0);
  return g;
}

// Flat views for the optimizer: order A1, b1, A2, b2 (column-major blocks).
inline void flatten_into(const MlpParams& p, Eigen::VectorXd& flat, Eigen::Index offset) {
  auto put = [&](const auto& block) {
    flat.segment(offset, block.size()) = Eigen::Map<const Eigen::VectorXd>(block.data(), block.size());
    offset += block.size();
  };
  put(p.A1);
  put(p.b1);
  put(p.A2);
  put(p.b2);
}

inline void unflatten_from(MlpParams& p, const Eigen::VectorXd& flat, Eigen::Index offset) {
  auto get = [&](auto& block) {
    Eigen::Map<Eigen::VectorXd>(block.data(), block.size()) = flat.segment(offset, block.size());
    offset += block.size();
  };
  get(p.A1);
  get(p.b1);
  get(p.A2);
  get(p.b2);
}

struct AdamState {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  std::int64_t step_count = 0;
  double beta1 = 0.9;
  double beta2 = 0.95;
  double epsilon = 1e-8;

  static AdamState fresh(Eigen::Index n, double beta1 = 0.9, double beta2 = 0.95,
                         double epsilon = 1e-8) {
    return {Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n), 0, beta1, beta2, epsilon};
  }
};

// In-place bias-corrected ADAM update.
inline void adam_step(AdamState& state, Eigen::VectorXd& params, const Eigen::VectorXd& grad,
                      double lr) {
  if (params.size() != grad.size() || state.m.size() != grad.size() ||
      state.v.size() != grad.size()) {
    throw DimensionError("ADAM state, parameters and gradient must have equal length");
  }
  ++state.step_count;
  state.m = state.beta1 * state.m + (1.0 - state.beta1) * grad;
  state.v = state.beta2 * state.v + (1.0 - state.beta2) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
  params.array() -=
      lr * (state.m.array() / c1) / ((state.v.array() / c2).sqrt() + state.epsilon);
}

struct CyclicLrSchedule {
  double base_lr = 1e-4;
  double max_lr = 1e-2;
  int cycle_len = 100;

  void validate() const {
    if (!(base_lr > 0) || !(max_lr > 0)) throw ConfigError("learning rates must be > 0");
    if (!(base_lr <= max_lr)) throw ConfigError("base_lr must not exceed max_lr");
    if (cycle_len < 1) throw ConfigError("cycle_len must be positive");
  }
};

// Triangle wave: base_lr at 0, max_lr at cycle_len, base_lr again at 2*cycle_len.
inline double cyclic_lr(const CyclicLrSchedule& s, std::int64_t iteration) {
  const std::int64_t period = 2 * static_cast<std::int64_t>(s.cycle_len);
  const std::int64_t pos = iteration % period;
  const std::int64_t up = pos <= s.cycle_len ? pos : period - pos;
  return s.base_lr + (s.max_lr - s.base_lr) * static_cast<double>(up) / s.cycle_len;
}

}  // namespace chaosrom
