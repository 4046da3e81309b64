#pragma once

// Exact dynamic mode decomposition with continuous-time eigenvalues and the
// analytic forecast  x(t) = Re(Phi exp(Omega t) Phi^+ x0).

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "chaosrom/errors.hpp"
#include "chaosrom/lorenz96.hpp"

namespace chaosrom {

struct DmdModel {
  Eigen::MatrixXcd Phi;       // n x r modes (decoder)
  Eigen::MatrixXcd Phi_pinv;  // r x n (encoder)
  Eigen::VectorXcd Omega;     // continuous eigenvalues log(lambda) / dt
  double dt = 1.0;

  Eigen::Index rank() const { return Omega.size(); }
  Eigen::Index dimension() const { return Phi.rows(); }

  void validate() const {
    if (Phi.cols() != Omega.size() || Phi_pinv.rows() != Omega.size() ||
        Phi_pinv.cols() != Phi.rows()) {
      throw DimensionError("inconsistent DMD model shapes");
    }
    if (!(dt > 0)) throw InvalidModelError("DMD dt must be > 0");
  }
};

using SnapshotPair = std::pair<StateVector, StateVector>;

// Consecutive points within each trajectory; never across trajectories.
inline std::vector<SnapshotPair> snapshot_pairs(const std::vector<Trajectory>& trajectories) {
  std::vector<SnapshotPair> pairs;
  for (const auto& traj : trajectories) {
    for (std::size_t k = 0; k + 1 < traj.size(); ++k) {
      pairs.emplace_back(traj.states[k], traj.states[k + 1]);
    }
  }
  return pairs;
}

inline constexpr double kDmdRankTolerance = 1e-10;
inline constexpr double kDmdMinEigenvalue = 1e-14;

inline DmdModel fit_dmd(const std::vector<SnapshotPair>& pairs, Eigen::Index r, double dt) {
  if (r < 1) throw ConfigError("DMD rank must be >= 1");
  if (!(dt > 0)) throw ConfigError("DMD dt must be > 0");
  if (static_cast<Eigen::Index>(pairs.size()) < r) {
    throw RankDeficiencyError("DMD needs at least r snapshot pairs");
  }
  const Eigen::Index n = pairs.front().first.size();
  if (r > n) throw RankDeficiencyError("DMD rank exceeds the state dimension");
  const auto m = static_cast<Eigen::Index>(pairs.size());
  Eigen::MatrixXd X(n, m), Xp(n, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    const auto& [a, b] = pairs[static_cast<std::size_t>(j)];
    if (a.size() != n || b.size() != n) throw DimensionError("snapshot pairs differ in length");
    X.col(j) = a;
    Xp.col(j) = b;
  }

  Eigen::BDCSVD<Eigen::MatrixXd> svd(X, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& sigma = svd.singularValues();
  if (!(sigma[0] > 0) || !(sigma[r - 1] > kDmdRankTolerance * sigma[0])) {
    throw RankDeficiencyError("snapshot matrix has rank below " + std::to_string(r));
  }
  const Eigen::MatrixXd U = svd.matrixU().leftCols(r);
  const Eigen::MatrixXd V = svd.matrixV().leftCols(r);
  const Eigen::VectorXd sigma_inv = sigma.head(r).cwiseInverse();

  const Eigen::MatrixXd XpVSinv = Xp * V * sigma_inv.asDiagonal();
  const Eigen::MatrixXd A_tilde = U.transpose() * XpVSinv;
  Eigen::EigenSolver<Eigen::MatrixXd> eig(A_tilde, true);
  if (eig.info() != Eigen::Success) throw DegenerateError("eigendecomposition failed");

  Eigen::VectorXcd lambda = eig.eigenvalues();
  Eigen::MatrixXcd W = eig.eigenvectors();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(r));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    if (std::abs(lambda[a]) != std::abs(lambda[b])) return std::abs(lambda[a]) > std::abs(lambda[b]);
    return lambda[a].imag() > lambda[b].imag();
  });

  DmdModel model;
  model.dt = dt;
  model.Omega.resize(r);
  Eigen::MatrixXcd W_sorted(r, r);
  for (Eigen::Index i = 0; i < r; ++i) {
    const std::complex<double> l = lambda[order[static_cast<std::size_t>(i)]];
    if (std::abs(l) < kDmdMinEigenvalue) {
      throw DegenerateError("DMD eigenvalue with |lambda| < 1e-14 has no logarithm");
    }
    model.Omega[i] = std::log(l) / dt;
    W_sorted.col(i) = W.col(order[static_cast<std::size_t>(i)]);
  }
  model.Phi = XpVSinv.cast<std::complex<double>>() * W_sorted;
  model.Phi_pinv = Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXcd>(model.Phi).pseudoInverse();
  const double left_inverse_error =
      (model.Phi_pinv * model.Phi - Eigen::MatrixXcd::Identity(r, r)).cwiseAbs().maxCoeff();
  if (!(left_inverse_error <= 1e-8)) {
    throw DegenerateError("DMD modes are numerically dependent (|Phi^+ Phi - I| = " +
                          std::to_string(left_inverse_error) + ")");
  }
  return model;
}

inline Eigen::VectorXcd dmd_encode(const DmdModel& model, const StateVector& x) {
  if (x.size() != model.dimension()) throw DimensionError("state length does not match DMD model");
  return model.Phi_pinv * x.cast<std::complex<double>>();
}

inline Eigen::VectorXcd dmd_advance(const DmdModel& model, const Eigen::VectorXcd& b, double t) {
  return (model.Omega * t).array().exp().matrix().cwiseProduct(b);
}

inline StateVector dmd_decode(const DmdModel& model, const Eigen::VectorXcd& b) {
  return (model.Phi * b).real();
}

inline StateVector dmd_forecast(const DmdModel& model, const StateVector& x0, double t) {
  if (t < 0) throw ConfigError("DMD forecast time must be >= 0");
  return dmd_decode(model, dmd_advance(model, dmd_encode(model, x0), t));
}

}  // namespace chaosrom
