#pragma once

// Quadratic-manifold reduced order model:
//   x ~ x_bar + Phi u + u^T Phi_bar u,   du/dt = a + B u + u^T C u,
// with a POD basis Phi and ridge least-squares fits on the symmetric
// quadratic features {u_i u_j : i <= j}.

#include <cmath>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "chaosrom/errors.hpp"
#include "chaosrom/lorenz96.hpp"
#include "chaosrom/ode.hpp"
#include "chaosrom/tensor.hpp"

namespace chaosrom {

struct QuadraticModel {
  StateVector x_bar;
  Eigen::MatrixXd Phi;  // n x r, orthonormal columns
  Tensor3 Phi_bar;      // n x r x r
  Eigen::VectorXd a;    // r
  Eigen::MatrixXd B;    // r x r
  Tensor3 C;            // r x r x r

  Eigen::Index rank() const { return Phi.cols(); }
  Eigen::Index dimension() const { return Phi.rows(); }

  void validate() const {
    const Eigen::Index n = Phi.rows(), r = Phi.cols();
    if (x_bar.size() != n || a.size() != r || B.rows() != r || B.cols() != r ||
        Phi_bar.dim0() != n || Phi_bar.dim1() != r || Phi_bar.dim2() != r || C.dim0() != r ||
        C.dim1() != r || C.dim2() != r) {
      throw DimensionError("inconsistent quadratic model shapes");
    }
  }
};

inline constexpr double kRidgeScale = 1e-8;

inline Eigen::Index quadratic_feature_count(Eigen::Index r) { return r * (r + 1) / 2; }

// {u_i u_j : i <= j}, i outer.
inline Eigen::VectorXd quadratic_features(const Eigen::VectorXd& u) {
  const Eigen::Index r = u.size();
  Eigen::VectorXd q(quadratic_feature_count(r));
  Eigen::Index idx = 0;
  for (Eigen::Index i = 0; i < r; ++i) {
    for (Eigen::Index j = i; j < r; ++j) q[idx++] = u[i] * u[j];
  }
  return q;
}

// argmin |Q c - Y|^2 + alpha |c|^2 with alpha = 1e-8 |Q|_2^2, solved through
// the augmented system [Q; sqrt(alpha) I] by QR.
inline Eigen::MatrixXd ridge_solve(const Eigen::MatrixXd& Q, const Eigen::MatrixXd& Y) {
  const Eigen::Index s = Q.cols();
  const double spectral = Q.size() == 0 ? 0.0 : Eigen::JacobiSVD<Eigen::MatrixXd>(Q).singularValues()[0];
  if (spectral == 0.0) return Eigen::MatrixXd::Zero(s, Y.cols());
  const double sqrt_alpha = std::sqrt(kRidgeScale) * spectral;
  Eigen::MatrixXd aug(Q.rows() + s, s);
  aug << Q, sqrt_alpha * Eigen::MatrixXd::Identity(s, s);
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(Q.rows() + s, Y.cols());
  rhs.topRows(Q.rows()) = Y;
  return aug.colPivHouseholderQr().solve(rhs);
}

// Coefficients on the non-redundant features -> tensor symmetric in (j, k).
inline Tensor3 symmetric_tensor_from_features(const Eigen::MatrixXd& coeffs, Eigen::Index r) {
  // coeffs: features x outputs
  Tensor3 T(coeffs.cols(), r, r);
  Eigen::Index idx = 0;
  for (Eigen::Index j = 0; j < r; ++j) {
    for (Eigen::Index k = j; k < r; ++k, ++idx) {
      for (Eigen::Index i = 0; i < coeffs.cols(); ++i) {
        if (j == k) {
          T(i, j, j) = coeffs(idx, i);
        } else {
          T(i, j, k) = 0.5 * coeffs(idx, i);
          T(i, k, j) = 0.5 * coeffs(idx, i);
        }
      }
    }
  }
  return T;
}

inline std::pair<StateVector, Eigen::MatrixXd> fit_pod(const std::vector<StateVector>& states,
                                                       Eigen::Index r) {
  if (r < 1) throw ConfigError("POD rank must be >= 1");
  if (static_cast<Eigen::Index>(states.size()) < r) {
    throw RankDeficiencyError("POD needs at least r snapshots");
  }
  const Eigen::Index n = states.front().size();
  if (r > n) throw RankDeficiencyError("POD rank exceeds the state dimension");
  const auto m = static_cast<Eigen::Index>(states.size());
  Eigen::MatrixXd S(n, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    if (states[static_cast<std::size_t>(j)].size() != n) throw DimensionError("snapshot lengths differ");
    S.col(j) = states[static_cast<std::size_t>(j)];
  }
  StateVector x_bar = S.rowwise().mean();
  S.colwise() -= x_bar;
  Eigen::BDCSVD<Eigen::MatrixXd> svd(S, Eigen::ComputeThinU);
  const Eigen::VectorXd& sigma = svd.singularValues();
  if (sigma.size() < r || !(sigma[0] > 0) || !(sigma[r - 1] > 1e-10 * sigma[0])) {
    throw RankDeficiencyError("centered snapshots have rank below " + std::to_string(r));
  }
  return {std::move(x_bar), svd.matrixU().leftCols(r)};
}

inline Eigen::VectorXd quad_encode(const StateVector& x_bar, const Eigen::MatrixXd& Phi,
                                   const StateVector& x) {
  if (x.size() != Phi.rows()) throw DimensionError("state length does not match the POD basis");
  return Phi.transpose() * (x - x_bar);
}

inline Tensor3 fit_quadratic_decoder(const std::vector<StateVector>& states, const StateVector& x_bar,
                                     const Eigen::MatrixXd& Phi) {
  const Eigen::Index n = Phi.rows(), r = Phi.cols();
  const auto m = static_cast<Eigen::Index>(states.size());
  Eigen::MatrixXd Q(m, quadratic_feature_count(r));
  Eigen::MatrixXd residual(m, n);
  for (Eigen::Index p = 0; p < m; ++p) {
    const StateVector& x = states[static_cast<std::size_t>(p)];
    const Eigen::VectorXd u = quad_encode(x_bar, Phi, x);
    Q.row(p) = quadratic_features(u).transpose();
    residual.row(p) = (x - x_bar - Phi * u).transpose();
  }
  return symmetric_tensor_from_features(ridge_solve(Q, residual), r);
}

struct LatentDerivative {
  Eigen::VectorXd u;
  Eigen::VectorXd dudt;
};

// Centered differences inside, first-order one-sided differences at the ends.
inline std::vector<LatentDerivative> fd_derivative(const Trajectory& traj) {
  if (traj.size() < 2) throw ConfigError("finite differences need at least two points");
  const double h = traj.times[1] - traj.times[0];
  for (std::size_t k = 1; k + 1 < traj.size(); ++k) {
    const double hk = traj.times[k + 1] - traj.times[k];
    if (std::abs(hk - h) > 1e-9 * std::max(1.0, std::abs(h))) {
      throw ConfigError("finite differences need uniform spacing");
    }
  }
  const std::size_t K = traj.size() - 1;
  std::vector<LatentDerivative> out;
  out.reserve(traj.size());
  for (std::size_t k = 0; k <= K; ++k) {
    Eigen::VectorXd d;
    if (k == 0) {
      d = (traj.states[1] - traj.states[0]) / h;
    } else if (k == K) {
      d = (traj.states[K] - traj.states[K - 1]) / h;
    } else {
      d = (traj.states[k + 1] - traj.states[k - 1]) / (2.0 * h);
    }
    out.push_back({traj.states[k], std::move(d)});
  }
  return out;
}

struct QuadraticDynamics {
  Eigen::VectorXd a;
  Eigen::MatrixXd B;
  Tensor3 C;
};

inline QuadraticDynamics fit_quadratic_dynamics(const std::vector<LatentDerivative>& samples) {
  if (samples.empty()) throw ConfigError("no derivative samples to fit");
  const Eigen::Index r = samples.front().u.size();
  const Eigen::Index s = quadratic_feature_count(r);
  const auto m = static_cast<Eigen::Index>(samples.size());
  Eigen::MatrixXd Q(m, 1 + r + s);
  Eigen::MatrixXd Y(m, r);
  for (Eigen::Index p = 0; p < m; ++p) {
    const auto& sample = samples[static_cast<std::size_t>(p)];
    if (sample.u.size() != r || sample.dudt.size() != r) throw DimensionError("latent sizes differ");
    Q(p, 0) = 1.0;
    Q.row(p).segment(1, r) = sample.u.transpose();
    Q.row(p).tail(s) = quadratic_features(sample.u).transpose();
    Y.row(p) = sample.dudt.transpose();
  }
  const Eigen::MatrixXd coeffs = ridge_solve(Q, Y);  // (1+r+s) x r
  QuadraticDynamics dyn;
  dyn.a = coeffs.row(0).transpose();
  dyn.B = coeffs.middleRows(1, r).transpose();
  dyn.C = symmetric_tensor_from_features(coeffs.bottomRows(s), r);
  return dyn;
}

struct QuadraticField {
  const QuadraticModel* model;
  Eigen::VectorXd operator()(const Eigen::VectorXd& u) const {
    return model->a + model->B * u + model->C.contract(u);
  }
};

inline Eigen::VectorXd quad_encode(const QuadraticModel& model, const StateVector& x) {
  return quad_encode(model.x_bar, model.Phi, x);
}

inline StateVector quad_decode(const QuadraticModel& model, const Eigen::VectorXd& u) {
  if (u.size() != model.rank()) throw DimensionError("latent length does not match the model");
  return model.x_bar + model.Phi * u + model.Phi_bar.contract(u);
}

inline SolverConfig default_rom_solver_config() {
  SolverConfig cfg;
  cfg.abs_tol = 1e-8;
  cfg.rel_tol = 1e-8;
  cfg.h_init = 1e-3;
  cfg.h_max = 0.05;
  cfg.divergence_norm = 1e6;
  return cfg;
}

// Latent advance over [0, t]; solver failures (finite-time blow-up) surface as
// DivergenceError carrying the time reached.
inline Eigen::VectorXd quad_advance(const QuadraticModel& model, const Eigen::VectorXd& u0,
                                    double t, const SolverConfig& solver) {
  if (t < 0) throw ConfigError("forecast time must be >= 0");
  if (t == 0) return u0;
  try {
    return integrate_adaptive(QuadraticField{&model}, u0, 0.0, t, solver);
  } catch (const NonConvergenceError& e) {
    throw DivergenceError(std::string("quadratic dynamics diverged: ") + e.what(), e.time());
  }
}

inline StateVector quad_forecast(const QuadraticModel& model, const StateVector& x0, double t,
                                 const SolverConfig& solver = default_rom_solver_config()) {
  return quad_decode(model, quad_advance(model, quad_encode(model, x0), t, solver));
}

// POD, quadratic decoder, and latent dynamics from finite differences taken
// inside each trajectory.
inline QuadraticModel fit_quadratic_rom(const std::vector<Trajectory>& trajectories, Eigen::Index r) {
  std::vector<StateVector> states;
  for (const auto& traj : trajectories) states.insert(states.end(), traj.states.begin(), traj.states.end());
  QuadraticModel model;
  std::tie(model.x_bar, model.Phi) = fit_pod(states, r);
  model.Phi_bar = fit_quadratic_decoder(states, model.x_bar, model.Phi);
  std::vector<LatentDerivative> samples;
  for (const auto& traj : trajectories) {
    Trajectory latent;
    latent.times = traj.times;
    for (const auto& x : traj.states) latent.states.push_back(quad_encode(model, x));
    const auto d = fd_derivative(latent);
    samples.insert(samples.end(), d.begin(), d.end());
  }
  auto dyn = fit_quadratic_dynamics(samples);
  model.a = std::move(dyn.a);
  model.B = std::move(dyn.B);
  model.C = std::move(dyn.C);
  return model;
}

}  // namespace chaosrom
