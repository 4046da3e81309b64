#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "chaosrom/io.hpp"
#include "chaosrom/lorenz96.hpp"
#include "chaosrom/random.hpp"

using namespace chaosrom;

namespace {

StateVector random_state(Eigen::Index n, std::mt19937_64& gen, double scale = 10.0) {
  StateVector x(n);
  for (Eigen::Index i = 0; i < n; ++i) x[i] = scale * (2.0 * unit_uniform(gen) - 1.0);
  return x;
}

StateVector shift(const StateVector& x, Eigen::Index s) {
  StateVector y(x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) y[(j + s) % x.size()] = x[j];
  return y;
}

DatasetConfig small_config(int n_points, int rollout) {
  DatasetConfig cfg;
  cfg.n_points = n_points;
  cfg.rollout = rollout;
  cfg.burn_in = 2.0;
  cfg.trajectory_gap = 0.5;
  return cfg;
}

}  // namespace

TEST(L96Rhs, HomogeneousFixedPoint) {
  const StateVector dx = l96_rhs(StateVector::Constant(40, 8.0), 8.0);
  EXPECT_LE(dx.cwiseAbs().maxCoeff(), 1e-14);
}

TEST(L96Rhs, ZeroStateGivesForcing) {
  const StateVector dx = l96_rhs(StateVector::Zero(40), 8.0);
  EXPECT_EQ(dx, StateVector::Constant(40, 8.0));
}

TEST(L96Rhs, HandEvaluatedFourDimensionalCase) {
  StateVector x(4);
  x << 1, 2, 3, 4;
  StateVector expected(4);
  expected << 3, 5, 11, 1;
  EXPECT_EQ(l96_rhs(x, 8.0), expected);
}

TEST(L96Rhs, RejectsTinyDimension) {
  EXPECT_THROW(l96_rhs(StateVector::Zero(3), 8.0), InvalidModelError);
}

TEST(L96Rhs, QuadraticTermConservesEnergy) {
  std::mt19937_64 gen(7);
  for (int trial = 0; trial < 100; ++trial) {
    const StateVector x = random_state(40, gen);
    const double residual = x.dot(l96_rhs(x, 0.0) + x);
    EXPECT_LE(std::abs(residual), 1e-12 * x.squaredNorm());
  }
}

TEST(L96Rhs, CyclicShiftEquivariance) {
  std::mt19937_64 gen(11);
  const StateVector x = random_state(12, gen);
  for (Eigen::Index s = 0; s < 12; ++s) {
    EXPECT_LE((l96_rhs(shift(x, s), 8.0) - shift(l96_rhs(x, 8.0), s)).cwiseAbs().maxCoeff(), 1e-14);
  }
}

TEST(Dataset, TrajectoryCountsFollowRollout) {
  const auto k1 = generate_dataset(small_config(100, 1));
  ASSERT_EQ(k1.size(), 50u);
  for (const auto& t : k1) EXPECT_EQ(t.size(), 2u);
  const auto k9 = generate_dataset(small_config(100, 9));
  ASSERT_EQ(k9.size(), 10u);
  for (const auto& t : k9) EXPECT_EQ(t.size(), 10u);
}

TEST(Dataset, SpacingAndGap) {
  const auto cfg = small_config(30, 2);
  const auto data = generate_dataset(cfg);
  for (std::size_t i = 0; i < data.size(); ++i) {
    EXPECT_NEAR(data[i].times[0], i * cfg.trajectory_gap, 1e-12);
    for (std::size_t k = 1; k < data[i].size(); ++k) {
      EXPECT_NEAR(data[i].times[k] - data[i].times[k - 1], 0.05, 1e-12);
    }
    for (const auto& x : data[i].states) {
      EXPECT_EQ(x.size(), 40);
      EXPECT_TRUE(x.allFinite());
    }
  }
}

TEST(Dataset, OverlappingTrajectoriesShareOneSolution) {
  auto cfg = small_config(8, 3);
  cfg.trajectory_gap = 0.1;  // trajectory 1 starts at trajectory 0's third point
  const auto data = generate_dataset(cfg);
  EXPECT_EQ(data[0].states[2], data[1].states[0]);
}

TEST(Dataset, RejectsIndivisiblePointCount) {
  EXPECT_THROW(generate_dataset(small_config(100, 2)), ConfigError);
  EXPECT_THROW(generate_dataset(small_config(100, 5)), ConfigError);
}

TEST(Dataset, DeterministicCsvBytes) {
  const auto cfg = small_config(12, 2);
  std::ostringstream a, b;
  write_trajectories(a, generate_dataset(cfg));
  write_trajectories(b, generate_dataset(cfg));
  EXPECT_EQ(a.str(), b.str());
}

TEST(Ensemble, ShapeDeterminismAndBulkStatistics) {
  auto cfg = small_config(10, 1);
  const auto one = generate_forecast_ensemble(1, cfg);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0].size(), 40);
  EXPECT_TRUE(one[0].allFinite());

  cfg.seed = 3;
  EXPECT_EQ(generate_forecast_ensemble(3, cfg), generate_forecast_ensemble(3, cfg));
  auto other = cfg;
  other.seed = 4;
  EXPECT_NE(generate_forecast_ensemble(3, cfg), generate_forecast_ensemble(3, other));

  const auto hundred = generate_forecast_ensemble(100, cfg);
  StateVector mean = StateVector::Zero(40);
  for (const auto& x : hundred) mean += x / 100.0;
  EXPECT_LT(mean.cwiseAbs().maxCoeff(), 10.0);
}

TEST(TrajectoryCsv, RoundTripIsBitExact) {
  const auto data = generate_dataset(small_config(6, 2));
  std::ostringstream os;
  write_trajectories(os, data);
  std::istringstream is(os.str());
  const auto back = read_trajectories(is);
  ASSERT_EQ(back.size(), data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    EXPECT_EQ(back[i].times, data[i].times);
    EXPECT_EQ(back[i].states, data[i].states);
  }
}

TEST(TrajectoryCsv, RejectsMalformedRows) {
  std::istringstream short_row("time,x1,x2\n0,1\n");
  EXPECT_THROW(read_trajectories(short_row), ParseError);
  std::istringstream bad_number("time,x1\n0,abc\n");
  EXPECT_THROW(read_trajectories(bad_number), ParseError);
}
