#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "chaosrom/ode.hpp"
#include "chaosrom/sphere.hpp"

using namespace chaosrom;
using Eigen::VectorXd;

namespace {

const auto decay = [](const VectorXd& u) -> VectorXd { return -u; };
const auto zero_field = [](const VectorXd& u) -> VectorXd { return VectorXd::Zero(u.size()); };
const auto rotation = [](const VectorXd& u) -> VectorXd {
  VectorXd d(2);
  d << -u[1], u[0];
  return d;
};

VectorXd scalar(double v) { return VectorXd::Constant(1, v); }

double order_estimate(double e_coarse, double e_fine) { return std::log2(e_coarse / e_fine); }

}  // namespace

TEST(TrapStep, ZeroField) {
  VectorXd u(3);
  u << 1, -2, 3;
  const auto s = trap_step(zero_field, u, 0.7);
  EXPECT_EQ(s.u_next, u);
  EXPECT_EQ(s.u_embedded, u);
  EXPECT_EQ(s.error_estimate, 0.0);
}

TEST(TrapStep, LinearDecayHandValues) {
  const auto s = trap_step(decay, scalar(1.0), 0.1);
  EXPECT_NEAR(s.u_next[0], 0.905, 1e-15);
  EXPECT_NEAR(s.u_embedded[0], 0.9, 1e-15);
  EXPECT_NEAR(s.error_estimate, 0.005, 1e-15);
}

TEST(TrapStep, SphereProjectionRescalesBothSolutions) {
  VectorXd u(2);
  u << 1, 0;
  const auto s = trap_step(rotation, u, 0.2, SphereProjection{});
  // Pre-projection (0.98, 0.2).
  const double norm = std::hypot(0.98, 0.2);
  EXPECT_NEAR(s.u_next[0], 0.98 / norm, 1e-15);
  EXPECT_NEAR(s.u_next[1], 0.2 / norm, 1e-15);
  EXPECT_NEAR(s.u_next.norm(), 1.0, 1e-15);
  EXPECT_NEAR(s.u_embedded.norm(), 1.0, 1e-15);
}

TEST(TrapStep, NonFiniteFieldIsDivergence) {
  const auto bad = [](const VectorXd& u) -> VectorXd {
    return VectorXd::Constant(u.size(), std::numeric_limits<double>::quiet_NaN());
  };
  EXPECT_THROW(trap_step(bad, scalar(1.0), 0.1), DivergenceError);
}

TEST(IntegrateFixed, SingleStepMatchesTrapStep) {
  EXPECT_EQ(integrate_fixed(decay, scalar(1.0), 1, 0.1), trap_step(decay, scalar(1.0), 0.1).u_next);
}

TEST(IntegrateFixed, RepeatedTrapezoidalMap) {
  const VectorXd u = integrate_fixed(decay, scalar(1.0), 10, 0.1);
  EXPECT_NEAR(u[0], std::pow(0.905, 10), 1e-15);
  EXPECT_NEAR(u[0], 0.368541, 1e-6);
}

TEST(IntegrateFixed, EveryProjectedStateIsOnTheSphere) {
  VectorXd u(2);
  u << 0.6, 0.8;
  int seen = 0;
  integrate_fixed(rotation, u, 200, 0.1, SphereProjection{}, [&](const VectorXd& v) {
    EXPECT_NEAR(v.norm(), 1.0, 1e-12);
    ++seen;
  });
  EXPECT_EQ(seen, 200);
}

TEST(IntegrateFixed, SecondOrderConvergence) {
  const double exact = std::exp(-1.0);
  double err[3];
  const double hs[3] = {0.1, 0.05, 0.025};
  for (int i = 0; i < 3; ++i) {
    const auto steps = static_cast<std::size_t>(std::lround(1.0 / hs[i]));
    err[i] = std::abs(integrate_fixed(decay, scalar(1.0), steps, hs[i])[0] - exact);
  }
  for (int i = 0; i < 2; ++i) {
    const double p = order_estimate(err[i], err[i + 1]);
    EXPECT_GE(p, 1.8);
    EXPECT_LE(p, 2.2);
  }
}

TEST(IntegrateFixed, EmbeddedEulerIsFirstOrder) {
  const double exact = std::exp(-1.0);
  double err[3];
  const double hs[3] = {0.1, 0.05, 0.025};
  for (int i = 0; i < 3; ++i) {
    VectorXd u = scalar(1.0);
    const auto steps = std::lround(1.0 / hs[i]);
    for (long j = 0; j < steps; ++j) u = trap_step(decay, u, hs[i]).u_embedded;
    err[i] = std::abs(u[0] - exact);
  }
  for (int i = 0; i < 2; ++i) {
    const double p = order_estimate(err[i], err[i + 1]);
    EXPECT_GE(p, 0.8);
    EXPECT_LE(p, 1.2);
  }
}

TEST(IntegrateAdaptive, ZeroFieldIsExact) {
  VectorXd u(2);
  u << 3, 4;
  EXPECT_EQ(integrate_adaptive(zero_field, u, 0.0, 5.0, SolverConfig{}), u);
}

TEST(IntegrateAdaptive, LinearDecayAccuracy) {
  SolverConfig cfg;
  cfg.abs_tol = cfg.rel_tol = 1e-8;
  const VectorXd u = integrate_adaptive(decay, scalar(1.0), 0.0, 1.0, cfg);
  EXPECT_LT(std::abs(u[0] - std::exp(-1.0)), 1e-6);
}

TEST(IntegrateAdaptive, LandsExactlyOnFinalTime) {
  AdaptiveIntegrator<decltype(decay)> march(decay, scalar(1.0), 0.0, SolverConfig{});
  march.advance_to(0.3);
  EXPECT_EQ(march.time(), 0.3);
  march.advance_to(1.7);
  EXPECT_EQ(march.time(), 1.7);
}

TEST(IntegrateAdaptive, SphereProjectionHoldsOverLongHorizons) {
  VectorXd u(2);
  u << 1, 0;
  AdaptiveIntegrator<decltype(rotation), SphereProjection> march(rotation, u, 0.0, SolverConfig{});
  for (int k = 1; k <= 100; ++k) {
    march.advance_to(k * 1.0);
    EXPECT_GE(march.state().norm(), 1.0 - 1e-12);
    EXPECT_LE(march.state().norm(), 1.0 + 1e-12);
  }
}

TEST(IntegrateAdaptive, AgreesWithFineFixedSteps) {
  SolverConfig cfg;
  cfg.abs_tol = cfg.rel_tol = 1e-7;
  const auto [adaptive, stats] = integrate_adaptive_stats(decay, scalar(1.0), 0.0, 1.0, cfg);
  // Fixed h below the smallest accepted adaptive step.
  const auto steps = static_cast<std::size_t>(std::ceil(1.0 / stats.min_accepted_h)) + 1;
  const VectorXd fixed = integrate_fixed(decay, scalar(1.0), steps, 1.0 / steps);
  EXPECT_LE(std::abs(adaptive[0] - fixed[0]), 10 * cfg.abs_tol);
}

TEST(IntegrateAdaptive, FiniteTimeBlowUpIsDivergence) {
  // u' = u^2, u(0) = 1 escapes at t = 1.
  const auto blowup = [](const VectorXd& u) -> VectorXd { return u.cwiseAbs2(); };
  try {
    integrate_adaptive(blowup, scalar(1.0), 0.0, 2.0, SolverConfig{});
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    EXPECT_NEAR(e.time(), 1.0, 1e-3);
  }
}

TEST(IntegrateAdaptive, StepUnderflowIsNonConvergence) {
  SolverConfig cfg;
  cfg.abs_tol = cfg.rel_tol = 1e-14;
  cfg.h_min = cfg.h_init = 0.01;
  EXPECT_THROW(integrate_adaptive(decay, scalar(1.0), 0.0, 1.0, cfg), NonConvergenceError);
}

TEST(IntegrateAdaptive, MaxStepsIsNonConvergence) {
  SolverConfig cfg;
  cfg.max_steps = 3;
  cfg.h_max = 0.01;
  EXPECT_THROW(integrate_adaptive(decay, scalar(1.0), 0.0, 1.0, cfg), NonConvergenceError);
}

TEST(SolverConfig, Validation) {
  SolverConfig cfg;
  cfg.h_init = 1.0;
  cfg.h_max = 0.1;
  EXPECT_THROW(cfg.validate(), ConfigError);
  EXPECT_THROW(integrate_adaptive(decay, scalar(1.0), 1.0, 0.5, SolverConfig{}), ConfigError);
}
