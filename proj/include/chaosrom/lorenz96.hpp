#pragma once

// Lorenz '96 full-order model and the trajectory datasets built from it.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "chaosrom/errors.hpp"
#include "chaosrom/ode.hpp"
#include "chaosrom/random.hpp"

namespace chaosrom {

using StateVector = Eigen::VectorXd;

inline constexpr double kUnitsPerDay = 0.2;
inline constexpr double kDefaultForcing = 8.0;
inline constexpr double kLargestLyapunovExponent = 1.6852;

struct Trajectory {
  std::vector<double> times;
  std::vector<StateVector> states;

  std::size_t size() const { return times.size(); }
  Eigen::Index dimension() const { return states.empty() ? 0 : states.front().size(); }

  void validate() const {
    if (times.empty() || times.size() != states.size()) {
      throw DimensionError("trajectory needs |times| = |states| >= 1");
    }
    for (std::size_t k = 1; k < times.size(); ++k) {
      if (!(times[k] > times[k - 1])) throw ConfigError("trajectory times must strictly increase");
      if (states[k].size() != states[0].size()) {
        throw DimensionError("trajectory states have inconsistent length");
      }
    }
  }
};

// dx_j/dt = -x_{j-1} (x_{j-2} - x_{j+1}) - x_j + F, indices mod n.
inline StateVector l96_rhs(const StateVector& x, double forcing) {
  const Eigen::Index n = x.size();
  if (n < 4) throw InvalidModelError("Lorenz '96 needs dimension >= 4, got " + std::to_string(n));
  StateVector dx(n);
  const double* v = x.data();
  dx[0] = -v[n - 1] * (v[n - 2] - v[1]) - v[0] + forcing;
  dx[1] = -v[0] * (v[n - 1] - v[2]) - v[1] + forcing;
  for (Eigen::Index j = 2; j < n - 1; ++j) dx[j] = -v[j - 1] * (v[j - 2] - v[j + 1]) - v[j] + forcing;
  dx[n - 1] = -v[n - 2] * (v[n - 3] - v[0]) - v[n - 1] + forcing;
  return dx;
}

struct Lorenz96Field {
  double forcing = kDefaultForcing;
  StateVector operator()(const StateVector& x) const { return l96_rhs(x, forcing); }
};

struct DatasetConfig {
  int n_points = 1000;
  int rollout = 1;
  double spacing = 0.05;        // 6 hours
  double trajectory_gap = 6.0;  // 30 days
  double burn_in = 72.0;        // 360 days
  std::uint64_t seed = 0;
  double forcing = kDefaultForcing;
  int dimension = 40;

  int points_per_trajectory() const { return rollout + 1; }
  int trajectory_count() const { return n_points / points_per_trajectory(); }

  // Time of the last training sample, measured from the end of the burn-in.
  double training_window_end() const {
    return (trajectory_count() - 1) * trajectory_gap + rollout * spacing;
  }

  void validate() const {
    if (n_points <= 0) throw ConfigError("n_points must be positive");
    if (rollout <= 0) throw ConfigError("rollout must be positive");
    if (n_points % (rollout + 1) != 0) {
      throw ConfigError("n_points (" + std::to_string(n_points) + ") must be divisible by rollout+1 (" +
                        std::to_string(rollout + 1) + ")");
    }
    if (!(spacing > 0)) throw ConfigError("spacing must be > 0");
    if (!(trajectory_gap >= 0)) throw ConfigError("trajectory_gap must be >= 0");
    if (!(burn_in >= 0)) throw ConfigError("burn_in must be >= 0");
    if (dimension < 4) throw InvalidModelError("Lorenz '96 needs dimension >= 4");
  }
};

inline SolverConfig reference_solver_config() {
  SolverConfig cfg;
  cfg.abs_tol = 1e-6;
  cfg.rel_tol = 1e-6;
  cfg.h_init = 1e-3;
  cfg.h_max = 0.05;
  return cfg;
}

// Spun-up state at the end of burn_in, starting from F*1 + 0.01 e_1.
inline StateVector spun_up_state(const DatasetConfig& cfg, const SolverConfig& solver) {
  StateVector x = StateVector::Constant(cfg.dimension, cfg.forcing);
  x[0] += 0.01;
  if (cfg.burn_in > 0) {
    x = integrate_adaptive(Lorenz96Field{cfg.forcing}, x, 0.0, cfg.burn_in, solver);
  }
  return x;
}

namespace detail {

// Samples the one continuous reference solution (t = 0 at the end of burn-in)
// at the requested, sorted times.
inline std::vector<StateVector> sample_reference(const DatasetConfig& cfg,
                                                 const SolverConfig& solver,
                                                 const std::vector<double>& sorted_times) {
  AdaptiveIntegrator<Lorenz96Field> march(Lorenz96Field{cfg.forcing}, spun_up_state(cfg, solver),
                                          0.0, solver);
  std::vector<StateVector> out;
  out.reserve(sorted_times.size());
  for (double t : sorted_times) out.push_back(march.advance_to(t));
  return out;
}

}  // namespace detail

inline std::vector<Trajectory> generate_dataset(
    const DatasetConfig& cfg, const SolverConfig& solver = reference_solver_config()) {
  cfg.validate();
  const int n_traj = cfg.trajectory_count();
  const int per = cfg.points_per_trajectory();

  // (time, trajectory, index) triples, merged in time order so overlapping
  // trajectories still come from the same continuous solution.
  std::vector<std::tuple<double, int, int>> requests;
  requests.reserve(static_cast<std::size_t>(cfg.n_points));
  for (int i = 0; i < n_traj; ++i) {
    for (int k = 0; k < per; ++k) {
      requests.emplace_back(i * cfg.trajectory_gap + k * cfg.spacing, i, k);
    }
  }
  std::stable_sort(requests.begin(), requests.end(),
                   [](const auto& a, const auto& b) { return std::get<0>(a) < std::get<0>(b); });
  std::vector<double> times;
  times.reserve(requests.size());
  for (const auto& r : requests) times.push_back(std::get<0>(r));
  const auto states = detail::sample_reference(cfg, solver, times);

  std::vector<Trajectory> out(static_cast<std::size_t>(n_traj));
  for (auto& traj : out) {
    traj.times.resize(static_cast<std::size_t>(per));
    traj.states.resize(static_cast<std::size_t>(per));
  }
  for (std::size_t q = 0; q < requests.size(); ++q) {
    const auto [t, i, k] = requests[q];
    out[static_cast<std::size_t>(i)].times[static_cast<std::size_t>(k)] = t;
    out[static_cast<std::size_t>(i)].states[static_cast<std::size_t>(k)] = states[q];
  }
  return out;
}

// m on-attractor states taken after the training window, consecutive samples
// separated by spacing * (1 + U[0,1)) with U drawn from the seed.
inline std::vector<StateVector> generate_forecast_ensemble(
    int m, const DatasetConfig& cfg, const SolverConfig& solver = reference_solver_config()) {
  cfg.validate();
  if (m < 1) throw ConfigError("ensemble size must be >= 1");
  std::mt19937_64 gen(cfg.seed);
  std::vector<double> times;
  times.reserve(static_cast<std::size_t>(m));
  double t = cfg.training_window_end() + std::max(cfg.trajectory_gap, cfg.spacing);
  for (int i = 0; i < m; ++i) {
    t += cfg.spacing * (1.0 + unit_uniform(gen));
    times.push_back(t);
  }
  return detail::sample_reference(cfg, solver, times);
}

}  // namespace chaosrom
