#pragma once

// A single handle over every forecaster: the full-order Lorenz '96 model and
// the three reduced order model families.

#include <cmath>
#include <optional>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "chaosrom/dmd.hpp"
#include "chaosrom/errors.hpp"
#include "chaosrom/lorenz96.hpp"
#include "chaosrom/neural.hpp"
#include "chaosrom/ode.hpp"
#include "chaosrom/quadratic.hpp"

namespace chaosrom {

struct Lorenz96Truth {
  double forcing = kDefaultForcing;
  SolverConfig solver = reference_solver_config();
};

using RomModel = std::variant<Lorenz96Truth, DmdModel, QuadraticModel, NeuralRom>;

inline std::string kind_name(const RomModel& model) {
  return std::visit(
      [](const auto& m) -> std::string {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, Lorenz96Truth>) return "truth";
        else if constexpr (std::is_same_v<T, DmdModel>) return "dmd";
        else if constexpr (std::is_same_v<T, QuadraticModel>) return "quad";
        else return m.constrained ? "syco" : "ae";
      },
      model);
}

struct ForecastOptions {
  SolverConfig solver = default_rom_solver_config();
  // Decoded states with |x|_inf above this count as diverged.
  double blowup_threshold = 1e6;
};

struct ForecastPath {
  std::vector<double> times;
  std::vector<StateVector> states;  // one per time reached
  std::optional<double> diverged_at;
  std::string failure;

  bool complete() const { return !diverged_at.has_value(); }
};

namespace detail {

// Encode once, march the latent state through the output times with the
// adaptive solver, decode at each. Stops at the first failure.
template <typename Field, typename Projection, typename Decode>
void march_latent(ForecastPath& path, const std::vector<double>& times, Field field,
                  Eigen::VectorXd u0, const SolverConfig& solver, Projection proj,
                  const Decode& decode_fn, double blowup) {
  AdaptiveIntegrator<Field, Projection> march(std::move(field), std::move(u0), times.front(),
                                              solver, proj);
  for (double t : times) {
    try {
      march.advance_to(t);
    } catch (const DivergenceError& e) {
      path.diverged_at = e.time();
      path.failure = e.what();
      return;
    } catch (const NonConvergenceError& e) {
      path.diverged_at = e.time();
      path.failure = e.what();
      return;
    }
    StateVector x = decode_fn(march.state());
    if (!x.allFinite() || x.cwiseAbs().maxCoeff() > blowup) {
      path.diverged_at = t;
      path.failure = "decoded state left the finite/bounded range";
      return;
    }
    path.times.push_back(t);
    path.states.push_back(std::move(x));
  }
}

}  // namespace detail

// Forecast of x0 (given at times.front()) at every entry of the sorted
// vector times. Divergence is reported in the path, never thrown.
inline ForecastPath forecast_path(const RomModel& model, const StateVector& x0,
                                  const std::vector<double>& times,
                                  const ForecastOptions& opts = {}) {
  if (times.empty()) throw ConfigError("forecast needs at least one output time");
  ForecastPath path;
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, Lorenz96Truth>) {
          detail::march_latent(path, times, Lorenz96Field{m.forcing}, x0, m.solver, NoProjection{},
                               [](const Eigen::VectorXd& u) { return u; }, opts.blowup_threshold);
        } else if constexpr (std::is_same_v<T, DmdModel>) {
          const Eigen::VectorXcd b = dmd_encode(m, x0);
          for (double t : times) {
            path.times.push_back(t);
            path.states.push_back(dmd_decode(m, dmd_advance(m, b, t - times.front())));
          }
        } else if constexpr (std::is_same_v<T, QuadraticModel>) {
          detail::march_latent(
              path, times, QuadraticField{&m}, quad_encode(m, x0), opts.solver, NoProjection{},
              [&m](const Eigen::VectorXd& u) { return quad_decode(m, u); }, opts.blowup_threshold);
        } else {
          const auto dec = [&m](const Eigen::VectorXd& u) { return decode(m, u); };
          if (m.constrained) {
            detail::march_latent(path, times, NeuralField{&m.dynamics}, encode(m, x0), opts.solver,
                                 SphereProjection{}, dec, opts.blowup_threshold);
          } else {
            detail::march_latent(path, times, NeuralField{&m.dynamics}, encode(m, x0), opts.solver,
                                 NoProjection{}, dec, opts.blowup_threshold);
          }
        }
      },
      model);
  return path;
}

// Observation grid 0, spacing, 2 spacing, ..., horizon.
inline std::vector<double> observation_times(double horizon, double spacing) {
  if (!(horizon > 0) || !(spacing > 0)) throw ConfigError("horizon and spacing must be > 0");
  const auto steps = static_cast<long>(std::floor(horizon / spacing + 1e-9));
  std::vector<double> times;
  for (long k = 0; k <= steps; ++k) times.push_back(static_cast<double>(k) * spacing);
  return times;
}

// Neural ROM forecast; a divergence is thrown with the time reached.
inline Trajectory rom_forecast(const NeuralRom& model, const StateVector& x0, double horizon,
                               double spacing, const ForecastOptions& opts = {}) {
  auto path = forecast_path(RomModel{model}, x0, observation_times(horizon, spacing), opts);
  if (!path.complete()) {
    throw DivergenceError("forecast diverged at t=" + std::to_string(*path.diverged_at) + ": " +
                              path.failure,
                          *path.diverged_at);
  }
  return Trajectory{std::move(path.times), std::move(path.states)};
}

// Latent states visited by a neural forecast at the observation times.
inline std::vector<Eigen::VectorXd> latent_path(const NeuralRom& model, const StateVector& x0,
                                                const std::vector<double>& times,
                                                const SolverConfig& solver) {
  std::vector<Eigen::VectorXd> out;
  const NeuralField field{&model.dynamics};
  auto run = [&](auto proj) {
    AdaptiveIntegrator<NeuralField, decltype(proj)> march(field, encode(model, x0), times.front(),
                                                          solver, proj);
    for (double t : times) out.push_back(march.advance_to(t));
  };
  if (model.constrained) run(SphereProjection{});
  else run(NoProjection{});
  return out;
}

}  // namespace chaosrom
