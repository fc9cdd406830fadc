#include <random>

#include <gtest/gtest.h>

#include "ncsmpc/disturbance.hpp"
#include "ncsmpc/linear_system.hpp"
#include "oracle_values.hpp"
#include "test_util.hpp"

using namespace ncsmpc;
using testutil::vec;

TEST(Step, ZeroIsFixedPoint) {
  const LinearPlant p = testutil::cartpole_plant();
  EXPECT_TRUE(step(p, Vec::Zero(4), Vec::Zero(1), Vec::Zero(4)).isZero(0.0));
}

TEST(Step, IdentityArithmetic) {
  const LinearPlant p(Mat::Identity(2, 2), vec({1, 0}));
  const Vec x = step(p, vec({1, 2}), vec({3}), vec({0.5, -0.5}));
  EXPECT_DOUBLE_EQ(x(0), 4.5);
  EXPECT_DOUBLE_EQ(x(1), 1.5);
}

TEST(Step, CartPoleMatchesOracle) {
  const LinearPlant p = testutil::cartpole_plant();
  const Vec x = step(p, vec({0, 0.1, 0, 0}), Vec::Zero(1), Vec::Zero(4));
  const Vec z = step_nominal(p, vec({1, 0, 0, 0}), vec({1}));
  for (int i = 0; i < 4; ++i) {
    EXPECT_NEAR(x(i), oracle::cartpole_step[i], 1e-15);
    EXPECT_NEAR(z(i), oracle::cartpole_nominal[i], 1e-15);
  }
}

TEST(Step, NominalEqualsZeroDisturbance) {
  const LinearPlant p = testutil::cartpole_plant();
  std::mt19937_64 rng(7);
  std::normal_distribution<double> n01;
  for (int k = 0; k < 100; ++k) {
    Vec z(4), v(1);
    for (int i = 0; i < 4; ++i) z(i) = n01(rng);
    v(0) = n01(rng);
    EXPECT_EQ(step_nominal(p, z, v), step(p, z, v, Vec::Zero(4)));
  }
}

TEST(Step, DimensionMismatchThrows) {
  const LinearPlant p = testutil::cartpole_plant();
  EXPECT_THROW(step(p, Vec::Zero(3), Vec::Zero(1), Vec::Zero(4)), DimensionError);
  EXPECT_THROW(step(p, Vec::Zero(4), Vec::Zero(2), Vec::Zero(4)), DimensionError);
}

TEST(Dare, CartPoleMatchesScipy) {
  const LinearPlant p = testutil::cartpole_plant();
  const Mat Q = vec({10, 1000, 1, 1}).asDiagonal();
  const Mat R = Mat::Identity(1, 1);
  const LqrSolution s = solve_dare(p, Q, R);
  EXPECT_LE(dare_residual(p, Q, R, s.P), 1e-8 * (1.0 + s.P.norm()));
  for (int i = 0; i < 4; ++i) {
    EXPECT_LT(testutil::rel_err(s.K(0, i), oracle::cartpole_K[i]), 1e-5) << i;
    EXPECT_LT(testutil::rel_err(s.P(i, i), oracle::cartpole_P_diag[i]), 1e-5) << i;
  }
  EXPECT_NEAR(spectral_radius(p.A + p.B * s.K), oracle::cartpole_rho, 1e-7);
  EXPECT_LT(spectral_radius(p.A + p.B * s.K), 1.0);
  EXPECT_LT((s.P - s.P.transpose()).norm(), 1e-9);
  EXPECT_GT(Eigen::SelfAdjointEigenSolver<Mat>(s.P).eigenvalues().minCoeff(), -1e-9);
}

TEST(Dare, ScalarClosedForm) {
  // a = 1, b = 1, q = r = 1: p = (1 + sqrt 5) / 2, k = -p / (1 + p).
  const LinearPlant p(Mat::Identity(1, 1), Mat::Identity(1, 1));
  const LqrSolution s = solve_dare(p, Mat::Identity(1, 1), Mat::Identity(1, 1));
  const double golden = 0.5 * (1.0 + std::sqrt(5.0));
  EXPECT_NEAR(s.P(0, 0), golden, 1e-8);
  EXPECT_NEAR(s.K(0, 0), -golden / (1.0 + golden), 1e-8);
}

TEST(Dare, UnstabilizableDoesNotConverge) {
  // Unstable mode the input cannot reach.
  Mat A(2, 2);
  A << 2, 0, 0, 0.5;
  const LinearPlant p(A, vec({0, 1}));
  EXPECT_THROW(solve_dare(p, Mat::Identity(2, 2), Mat::Identity(1, 1), 200), ConvergenceError);
}

TEST(Dare, RejectsIndefiniteR) {
  const LinearPlant p(Mat::Identity(1, 1), Mat::Identity(1, 1));
  EXPECT_THROW(solve_dare(p, Mat::Identity(1, 1), -Mat::Identity(1, 1)), std::invalid_argument);
}

TEST(Disturbance, ScalarChannelStaysInSegment) {
  const Vec g = vec({0, 0, 10, 1});
  DisturbanceModel d = DisturbanceModel::scalar_channel(g, 3);
  for (int k = 0; k < 1000; ++k) {
    const Vec w = d.sample();
    EXPECT_TRUE(contains(d.set(), w, 1e-12));
    EXPECT_NEAR(w(2), 10.0 * w(3), 1e-12);
    EXPECT_LE(std::abs(w(3)), 1.0);
  }
}

TEST(Disturbance, UniformStaysInBox) {
  DisturbanceModel d = DisturbanceModel::uniform(HPolytope::symmetric_box(vec({0.1, 2.0})), 9);
  for (int k = 0; k < 1000; ++k) EXPECT_TRUE(contains(d.set(), d.sample()));
}

TEST(Disturbance, ScriptedReplaysAndRejectsOutside) {
  const HPolytope W = HPolytope::symmetric_box(vec({1.0}));
  DisturbanceModel d = DisturbanceModel::scripted(W, {vec({0.5}), vec({-1.0})});
  EXPECT_DOUBLE_EQ(d.sample()(0), 0.5);
  EXPECT_DOUBLE_EQ(d.sample()(0), -1.0);
  EXPECT_THROW(DisturbanceModel::scripted(W, {vec({1.5})}), std::invalid_argument);
}
