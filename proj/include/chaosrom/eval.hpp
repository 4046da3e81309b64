#pragma once

// Forecast-quality evaluation: Gaussian product-kernel density estimates with
// Silverman bandwidths, the squared-log-ratio KL estimate
//   D(p||q) ~ (1/M) sum_i (log q(x_i) - log p(x_i))^2 / 2,   x_i ~ p,
// and the ensemble forecasting experiment built on them.

#include <cmath>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "chaosrom/errors.hpp"
#include "chaosrom/io.hpp"
#include "chaosrom/lorenz96.hpp"
#include "chaosrom/rom_model.hpp"

namespace chaosrom {

struct KdeModel {
  Eigen::MatrixXd samples;    // d x m
  Eigen::VectorXd bandwidth;  // d

  Eigen::Index dimension() const { return samples.rows(); }
  Eigen::Index count() const { return samples.cols(); }
};

// Per-dimension h_i = sigma_i (4 / ((d + 2) m))^(1/(d + 4)), sigma_i the
// unbiased sample standard deviation.
inline KdeModel kde_fit(const std::vector<StateVector>& samples) {
  if (samples.size() < 2) throw DegenerateError("KDE needs at least two samples");
  const Eigen::Index d = samples.front().size();
  const auto m = static_cast<Eigen::Index>(samples.size());
  KdeModel kde;
  kde.samples.resize(d, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    const auto& s = samples[static_cast<std::size_t>(j)];
    if (s.size() != d) throw DimensionError("KDE samples differ in length");
    if (!s.allFinite()) throw DegenerateError("KDE samples must be finite");
    kde.samples.col(j) = s;
  }
  const Eigen::VectorXd mean = kde.samples.rowwise().mean();
  const Eigen::VectorXd sigma =
      ((kde.samples.colwise() - mean).rowwise().squaredNorm() / static_cast<double>(m - 1))
          .cwiseSqrt();
  for (Eigen::Index i = 0; i < d; ++i) {
    if (!(sigma[i] > 0)) {
      throw DegenerateError("KDE dimension " + std::to_string(i + 1) + " has zero spread");
    }
  }
  const double factor = std::pow(4.0 / ((static_cast<double>(d) + 2.0) * static_cast<double>(m)),
                                 1.0 / (static_cast<double>(d) + 4.0));
  kde.bandwidth = sigma * factor;
  return kde;
}

// Log-density at every column of queries (d x q), by log-sum-exp over kernels.
inline Eigen::VectorXd kde_log_density_many(const KdeModel& kde, const Eigen::MatrixXd& queries) {
  if (queries.rows() != kde.dimension()) throw DimensionError("query length does not match KDE");
  const Eigen::Index m = kde.count();
  const Eigen::VectorXd inv_h = kde.bandwidth.cwiseInverse();
  const Eigen::VectorXd center = kde.samples.rowwise().mean();
  const Eigen::MatrixXd S = inv_h.asDiagonal() * (kde.samples.colwise() - center);
  const Eigen::RowVectorXd s_sq = S.colwise().squaredNorm();
  const double log_norm = -std::log(static_cast<double>(m)) - kde.bandwidth.array().log().sum() -
                          0.5 * static_cast<double>(kde.dimension()) * std::log(2.0 * M_PI);

  Eigen::VectorXd out(queries.cols());
  constexpr Eigen::Index kChunk = 512;
  for (Eigen::Index start = 0; start < queries.cols(); start += kChunk) {
    const Eigen::Index count = std::min(kChunk, queries.cols() - start);
    const Eigen::MatrixXd Q = inv_h.asDiagonal() * (queries.middleCols(start, count).colwise() - center);
    // Squared scaled distances, one row per query.
    Eigen::MatrixXd D = -2.0 * (Q.transpose() * S);
    D.colwise() += Q.colwise().squaredNorm().transpose();
    D.rowwise() += s_sq;
    for (Eigen::Index q = 0; q < count; ++q) {
      const Eigen::ArrayXd e = -0.5 * D.row(q).transpose().array().max(0.0);
      const double top = e.maxCoeff();
      out[start + q] = top + std::log((e - top).exp().sum()) + log_norm;
    }
  }
  return out;
}

inline double kde_log_density(const KdeModel& kde, const StateVector& x) {
  return kde_log_density_many(kde, Eigen::MatrixXd(x))[0];
}

// (1/M) sum (log q - log p)^2 / 2 over precomputed log-densities.
inline double kl_from_log_densities(const Eigen::VectorXd& log_p, const Eigen::VectorXd& log_q) {
  if (log_p.size() != log_q.size() || log_p.size() < 1) {
    throw DimensionError("KL estimate needs equal, non-empty log-density vectors");
  }
  return 0.5 * (log_q - log_p).squaredNorm() / static_cast<double>(log_p.size());
}

inline double kl_approx(const KdeModel& p, const KdeModel& q,
                        const std::vector<StateVector>& eval_samples) {
  if (eval_samples.empty()) throw ConfigError("KL estimate needs at least one sample");
  Eigen::MatrixXd X(p.dimension(), static_cast<Eigen::Index>(eval_samples.size()));
  for (std::size_t i = 0; i < eval_samples.size(); ++i) X.col(static_cast<Eigen::Index>(i)) = eval_samples[i];
  if (&p == &q) return 0.0;
  return kl_from_log_densities(kde_log_density_many(p, X), kde_log_density_many(q, X));
}

struct KlReport {
  int day = 0;
  std::string method;
  double kl = 0.0;  // +inf when more than half of the ensemble diverged
  int excluded = 0;
  int samples = 0;
  std::string error;  // non-empty when the KL could not be computed

  bool ok() const { return error.empty(); }
};

struct NamedModel {
  std::string name;
  RomModel model;
};

// Day-by-day KL of each model's forecast cloud (p) from the truth cloud (q).
// Samples a model fails to propagate are excluded and counted; past 50%
// excluded the KL is reported as +inf.
inline std::vector<KlReport> kl_experiment(const std::vector<StateVector>& ensemble,
                                           const std::vector<NamedModel>& models,
                                           const std::vector<int>& days,
                                           const ForecastOptions& opts = {},
                                           const Lorenz96Truth& truth = {}) {
  if (ensemble.empty()) throw ConfigError("empty forecast ensemble");
  if (days.empty()) throw ConfigError("no forecast days requested");
  std::vector<double> times{0.0};
  for (int d : days) {
    if (d < 1) throw ConfigError("forecast days must be >= 1");
    if (d * kUnitsPerDay <= times.back()) throw ConfigError("forecast days must increase");
    times.push_back(d * kUnitsPerDay);
  }
  const auto M = static_cast<int>(ensemble.size());

  // clouds[day][sample]; missing entries mark divergence.
  using Cloud = std::vector<std::optional<StateVector>>;
  auto propagate = [&](const RomModel& model) {
    std::vector<Cloud> clouds(days.size(), Cloud(ensemble.size()));
    for (std::size_t s = 0; s < ensemble.size(); ++s) {
      const auto path = forecast_path(model, ensemble[s], times, opts);
      for (std::size_t i = 1; i < path.states.size(); ++i) clouds[i - 1][s] = path.states[i];
    }
    return clouds;
  };
  auto reached = [](const Cloud& cloud) {
    std::vector<StateVector> out;
    for (const auto& x : cloud) {
      if (x) out.push_back(*x);
    }
    return out;
  };

  const auto truth_clouds = propagate(RomModel{truth});
  std::vector<KlReport> reports;
  for (const auto& named : models) {
    const bool is_truth = std::holds_alternative<Lorenz96Truth>(named.model);
    const auto model_clouds = is_truth ? truth_clouds : propagate(named.model);
    for (std::size_t di = 0; di < days.size(); ++di) {
      KlReport report;
      report.day = days[di];
      report.method = named.name;
      report.samples = M;
      const auto p_cloud = reached(model_clouds[di]);
      const auto q_cloud = reached(truth_clouds[di]);
      report.excluded = M - static_cast<int>(p_cloud.size());
      if (2 * report.excluded > M) {
        report.kl = std::numeric_limits<double>::infinity();
      } else {
        try {
          const KdeModel p = kde_fit(p_cloud);
          const KdeModel q = kde_fit(q_cloud);
          report.kl = kl_approx(p, q, p_cloud);
        } catch (const Error& e) {
          report.kl = std::numeric_limits<double>::quiet_NaN();
          report.error = e.what();
        }
      }
      reports.push_back(std::move(report));
    }
  }
  return reports;
}

inline void write_kl_reports(std::ostream& os, const std::vector<KlReport>& reports) {
  os << "day,method,kl,excluded,M\n";
  for (const auto& r : reports) {
    os << r.day << ',' << r.method << ',' << (r.ok() ? format_real(r.kl) : std::string("error"))
       << ',' << r.excluded << ',' << r.samples << '\n';
  }
}

// Six-hour-grid forecast export; time column in days. A divergence ends the
// table with `# diverged at t=<days>`.
inline ForecastPath flow_export(std::ostream& os, const RomModel& model, const StateVector& x0,
                                double days, const ForecastOptions& opts = {}) {
  if (!(days > 0)) throw ConfigError("flow export needs days > 0");
  constexpr double kStepDays = 0.25;
  std::vector<double> times;
  const auto steps = static_cast<long>(std::floor(days / kStepDays + 1e-9));
  for (long k = 0; k <= steps; ++k) times.push_back(static_cast<double>(k) * kStepDays * kUnitsPerDay);
  auto path = forecast_path(model, x0, times, opts);
  os << csv_header(x0.size()) << '\n';
  for (std::size_t k = 0; k < path.states.size(); ++k) {
    write_state_row(os, static_cast<double>(k) * kStepDays, path.states[k]);
  }
  if (path.diverged_at) os << "# diverged at t=" << format_real(*path.diverged_at / kUnitsPerDay) << '\n';
  return path;
}

}  // namespace chaosrom
