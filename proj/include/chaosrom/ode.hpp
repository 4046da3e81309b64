#pragma once

// Explicit trapezoidal rule (Heun) with an embedded Euler solution, optional
// per-step projection onto a constraint manifold, and an elementary step-size
// controller.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "chaosrom/errors.hpp"
#include "chaosrom/sphere.hpp"

namespace chaosrom {

template <typename State = Eigen::VectorXd>
struct StepResult {
  State u_next;
  State u_embedded;
  double error_estimate = 0.0;
};

struct SolverConfig {
  double abs_tol = 1e-8;
  double rel_tol = 1e-8;
  double h_init = 1e-3;
  double h_min = 1e-12;
  double h_max = 0.05;
  std::size_t max_steps = 50'000'000;
  // Accepted states with |u|_inf above this are reported as divergence.
  double divergence_norm = std::numeric_limits<double>::infinity();

  void validate() const {
    if (!(abs_tol > 0) || !(rel_tol > 0)) throw ConfigError("solver tolerances must be > 0");
    if (!(h_min > 0) || !(h_init > 0) || !(h_max > 0)) {
      throw ConfigError("solver step sizes must be > 0");
    }
    if (!(h_min <= h_init && h_init <= h_max)) {
      throw ConfigError("solver requires h_min <= h_init <= h_max");
    }
    if (max_steps == 0) throw ConfigError("solver max_steps must be positive");
    if (!(divergence_norm > 0)) throw ConfigError("solver divergence_norm must be > 0");
  }
};

namespace detail {

template <typename State, typename Field>
State eval_field(Field& f, const State& u, double t) {
  State out = f(u);
  if (!out.allFinite()) {
    throw DivergenceError("vector field returned a non-finite value at t=" + std::to_string(t), t,
                          Eigen::Map<const Eigen::VectorXd>(u.data(), u.size()));
  }
  return out;
}

}  // namespace detail

// One step of
//   k1 = h f(u),  k2 = h f(u + k1),
//   u_next = P[u + (k1 + k2)/2],  u_embedded = P[u + k1].
template <typename Derived, typename Field, typename Projection = NoProjection,
          typename State = typename Derived::PlainObject>
StepResult<State> trap_step(Field&& f, const Eigen::MatrixBase<Derived>& u_in, double h,
                            const Projection& proj = {},
                            double t = std::numeric_limits<double>::quiet_NaN()) {
  // Binds directly when u_in is already a plain object.
  const State& u = u_in.derived();
  State k1 = detail::eval_field(f, u, t);
  k1 *= h;
  StepResult<State> result;
  result.u_embedded = u + k1;
  State k2 = detail::eval_field(f, result.u_embedded, t);
  k2 *= h;
  result.u_next = u + 0.5 * (k1 + k2);
  proj(result.u_next);
  proj(result.u_embedded);
  if (!result.u_next.allFinite()) {
    throw DivergenceError("step produced a non-finite state", t,
                          Eigen::Map<const Eigen::VectorXd>(u.data(), u.size()));
  }
  result.error_estimate = (result.u_next - result.u_embedded).norm();
  return result;
}

// Fixed schedule of n_substeps steps of size h. The observer, when given, sees
// every state after each step (already projected).
template <typename Derived, typename Field, typename Projection = NoProjection,
          typename Observer = std::nullptr_t>
typename Derived::PlainObject integrate_fixed(Field&& f, const Eigen::MatrixBase<Derived>& u0,
                                              std::size_t n_substeps, double h,
                                              const Projection& proj = {},
                                              Observer&& observer = nullptr) {
  typename Derived::PlainObject u = u0;
  if (n_substeps < 1) throw ConfigError("integrate_fixed needs at least one substep");
  if (!(h > 0)) throw ConfigError("integrate_fixed needs h > 0");
  for (std::size_t j = 0; j < n_substeps; ++j) {
    u = trap_step(f, u, h, proj, static_cast<double>(j) * h).u_next;
    if constexpr (!std::is_same_v<std::decay_t<Observer>, std::nullptr_t>) {
      observer(u);
    }
  }
  return u;
}

struct AdaptiveStats {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  double min_accepted_h = std::numeric_limits<double>::infinity();
};

// Stateful adaptive integrator: keeps the current time, state and proposed step
// between calls so a forecast can march through a sequence of output times.
template <typename Field, typename Projection = NoProjection>
class AdaptiveIntegrator {
 public:
  AdaptiveIntegrator(Field f, Eigen::VectorXd u0, double t0, SolverConfig cfg,
                     Projection proj = {})
      : f_(std::move(f)), u_(std::move(u0)), t_(t0), cfg_(cfg), proj_(proj), h_(cfg.h_init) {
    cfg_.validate();
  }

  const Eigen::VectorXd& state() const { return u_; }
  double time() const { return t_; }
  const AdaptiveStats& stats() const { return stats_; }

  const Eigen::VectorXd& advance_to(double t1) {
    if (t1 < t_) throw ConfigError("adaptive integration cannot run backwards");
    while (t_ < t1) {
      if (stats_.accepted + stats_.rejected >= cfg_.max_steps) {
        throw NonConvergenceError("adaptive solver exceeded max_steps", t_);
      }
      double h = std::min(h_, cfg_.h_max);
      const double remaining = t1 - t_;
      const bool last = h >= remaining * (1.0 - 1e-12);
      if (last) h = remaining;

      StepResult<Eigen::VectorXd> step;
      try {
        step = trap_step(f_, u_, h, proj_, t_);
      } catch (const DivergenceError& e) {
        throw DivergenceError(e.what(), t_, u_);
      }
      const double err = scaled_error(step);
      double factor = err == 0.0 ? kMaxFactor
                                 : std::clamp(kSafety / std::sqrt(err), kMinFactor, kMaxFactor);
      if (err <= 1.0) {
        t_ = last ? t1 : t_ + h;
        u_ = std::move(step.u_next);
        ++stats_.accepted;
        stats_.min_accepted_h = std::min(stats_.min_accepted_h, h);
        if (!(u_.cwiseAbs().maxCoeff() <= cfg_.divergence_norm)) {
          throw DivergenceError("state exceeded the divergence norm at t=" + std::to_string(t_), t_,
                                u_);
        }
        if (rejected_last_) factor = std::min(factor, 1.0);
        rejected_last_ = false;
        // A truncated final step says nothing about the step the error allows.
        h_ = last ? std::max(h_, h * factor) : h * factor;
      } else {
        ++stats_.rejected;
        rejected_last_ = true;
        h_ = h * factor;
        if (h_ < cfg_.h_min) {
          throw NonConvergenceError("adaptive step fell below h_min at t=" + std::to_string(t_),
                                    t_);
        }
      }
      h_ = std::min(h_, cfg_.h_max);
    }
    return u_;
  }

 private:
  static constexpr double kSafety = 0.9;
  static constexpr double kMinFactor = 0.2;
  static constexpr double kMaxFactor = 5.0;

  // Scaled RMS norm of u_next - u_embedded with per-component scale
  // abs_tol + rel_tol * max(|u_i|, |u_next_i|).
  double scaled_error(const StepResult<Eigen::VectorXd>& step) const {
    const Eigen::ArrayXd scale =
        cfg_.abs_tol + cfg_.rel_tol * u_.array().abs().max(step.u_next.array().abs());
    const Eigen::ArrayXd ratio = (step.u_next - step.u_embedded).array() / scale;
    return std::sqrt(ratio.square().mean());
  }

  Field f_;
  Eigen::VectorXd u_;
  double t_;
  SolverConfig cfg_;
  Projection proj_;
  double h_;
  bool rejected_last_ = false;
  AdaptiveStats stats_;
};

template <typename Field, typename Projection = NoProjection>
std::pair<Eigen::VectorXd, AdaptiveStats> integrate_adaptive_stats(
    Field&& f, const Eigen::VectorXd& u0, double t0, double t1, const SolverConfig& cfg,
    const Projection& proj = {}) {
  if (!(t1 > t0)) throw ConfigError("integrate_adaptive requires t1 > t0");
  AdaptiveIntegrator<std::decay_t<Field>, Projection> solver(std::forward<Field>(f), u0, t0, cfg,
                                                            proj);
  solver.advance_to(t1);
  return {solver.state(), solver.stats()};
}

template <typename Field, typename Projection = NoProjection>
Eigen::VectorXd integrate_adaptive(Field&& f, const Eigen::VectorXd& u0, double t0, double t1,
                                   const SolverConfig& cfg, const Projection& proj = {}) {
  return integrate_adaptive_stats(std::forward<Field>(f), u0, t0, t1, cfg, proj).first;
}

}  // namespace chaosrom
