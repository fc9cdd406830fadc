#include <random>

#include <gtest/gtest.h>

#include "ncsmpc/qp.hpp"
#include "ncsmpc/tube_mpc.hpp"
#include "oracle_values.hpp"
#include "test_util.hpp"

using namespace ncsmpc;
using testutil::vec;

namespace {

HPolytope interval(double lo, double hi) { return HPolytope::box(vec({lo}), vec({hi})); }

OcpSpec scalar_spec(double u_bound) {
  OcpSpec s;
  s.plant = LinearPlant(vec({0.5}), vec({1}));
  s.N = 1;
  s.Q = s.R = s.P = Mat::Identity(1, 1);
  s.Xbar = s.Xfbar = interval(-100, 100);
  s.Ubar = interval(-u_bound, u_bound);
  return s;
}

HPolytope tilt_band() {
  Mat H = Mat::Zero(2, 4);
  H(0, 1) = 1.0;
  H(1, 1) = -1.0;
  return HPolytope(H, vec({0.2, 0.2}));
}

LqrSolution cartpole_lqr() {
  return solve_dare(testutil::cartpole_plant(), vec({10, 1000, 1, 1}).asDiagonal(),
                    Mat::Identity(1, 1));
}

}  // namespace

TEST(Qp, BoxConstrainedDiagonal) {
  // min 0.5|x|^2 - [2, -3]'x  s.t.  x <= 1, -x <= 1
  Mat G(4, 2);
  G << 1, 0, 0, 1, -1, 0, 0, -1;
  const DualActiveSetQp qp(Mat::Identity(2, 2), G);
  const QpResult r = qp.solve(vec({-2, 3}), Vec::Ones(4));
  ASSERT_EQ(r.status, QpStatus::optimal);
  EXPECT_NEAR(r.x(0), 1.0, 1e-12);
  EXPECT_NEAR(r.x(1), -1.0, 1e-12);
  EXPECT_LT(r.kkt_residual, 1e-10);
}

TEST(Qp, InfeasibleReportsViolatedRows) {
  Mat G(2, 1);
  G << 1, -1;
  const DualActiveSetQp qp(Mat::Identity(1, 1), G);
  const QpResult r = qp.solve(vec({0}), vec({-1, -1}));
  EXPECT_EQ(r.status, QpStatus::infeasible);
  EXPECT_FALSE(r.violated.empty());
}

TEST(Ocp, ScalarUnconstrained) {
  const OcpSolution s = solve_ocp(scalar_spec(100), vec({1}));
  ASSERT_EQ(s.status, QpStatus::optimal);
  // z1 = 0.5 + v; minimize 1 + v^2 + z1^2.
  EXPECT_NEAR(s.V[0](0), -0.25, 1e-12);
  EXPECT_NEAR(s.Z[1](0), 0.25, 1e-12);
  EXPECT_NEAR(s.objective, 1.125, 1e-12);
}

TEST(Ocp, ScalarInputClipped) {
  const OcpSolution s = solve_ocp(scalar_spec(0.1), vec({1}));
  ASSERT_EQ(s.status, QpStatus::optimal);
  EXPECT_NEAR(s.V[0](0), -0.1, 1e-12);
  EXPECT_NEAR(s.Z[1](0), 0.4, 1e-12);
  EXPECT_NEAR(s.objective, 1.17, 1e-12);
}

TEST(Ocp, OriginIsFixedPoint) {
  OcpSpec s = scalar_spec(1);
  s.N = 5;
  const OcpSolution sol = solve_ocp(s, vec({0}));
  ASSERT_EQ(sol.status, QpStatus::optimal);
  for (const Vec& v : sol.V) EXPECT_NEAR(v(0), 0.0, 1e-14);
  EXPECT_NEAR(sol.objective, 0.0, 1e-14);
}

TEST(Ocp, CartPoleMatchesConicSolver) {
  const LqrSolution lqr = cartpole_lqr();
  OcpSpec s;
  s.plant = testutil::cartpole_plant();
  s.N = 10;
  s.Q = vec({10, 1000, 1, 1}).asDiagonal();
  s.R = Mat::Identity(1, 1);
  s.P = lqr.P;
  s.Xbar = s.Xfbar = tilt_band();
  s.Ubar = interval(-3, 3);
  const OcpSolution sol = solve_ocp(s, vec({0.5, 0.1, 0, 0}));
  ASSERT_EQ(sol.status, QpStatus::optimal);
  ASSERT_EQ(sol.V.size(), 10u);
  for (int k = 0; k < 10; ++k) EXPECT_NEAR(sol.V[k](0), oracle::ocp_V[k], 1e-5) << k;
  EXPECT_NEAR(sol.objective, oracle::ocp_objective, 1e-6 * oracle::ocp_objective);
  EXPECT_LT(sol.kkt_residual, 1e-8);
  for (int k = 0; k < 10; ++k) {
    EXPECT_TRUE(sol.Z[k + 1].isApprox(step_nominal(s.plant, sol.Z[k], sol.V[k]), 1e-12));
  }
}

TEST(Ocp, SolverReusesFactorization) {
  const OcpSolver solver(scalar_spec(0.1));
  EXPECT_NEAR(solver.solve(vec({1})).V[0](0), -0.1, 1e-12);
  EXPECT_NEAR(solver.solve(vec({-1})).V[0](0), 0.1, 1e-12);
  EXPECT_NEAR(solver.solve(vec({0.1})).V[0](0), -0.025, 1e-12);
}

TEST(Tighten, ZeroTubeLeavesSetsUnchanged) {
  const LinearPlant p(vec({0.5}), vec({1}));
  const Mat K = vec({0.1});
  const TubeSpec tube = build_tube(p, K, HPolytope::point(vec({0})), 3, 1, 0);
  const TightenedSets t = tighten(interval(-3, 2), interval(-1, 4), interval(-1, 1), tube, K);
  EXPECT_NEAR(support(t.Xbar, vec({1})), 2, 1e-12);
  EXPECT_NEAR(support(t.Xbar, vec({-1})), 3, 1e-12);
  EXPECT_NEAR(support(t.Ubar, vec({1})), 4, 1e-12);
  EXPECT_NEAR(support(t.Ubar, vec({-1})), 1, 1e-12);
  EXPECT_NEAR(support(t.Xfbar, vec({1})), 1, 1e-12);
}

TEST(Tighten, IntervalGain) {
  const LinearPlant p(vec({0.25}), vec({1}));
  const Mat K = vec({0.5});
  const TubeSpec tube = build_tube(p, K, interval(-2, 2), 3, 1, 0, 1);
  const TightenedSets t = tighten(interval(-10, 10), interval(-20, 20), interval(-5, 5), tube, K);
  EXPECT_NEAR(support(t.Ubar, vec({1})), 19, 1e-12);
  EXPECT_NEAR(support(t.Ubar, vec({-1})), 19, 1e-12);
  EXPECT_NEAR(support(t.Xbar, vec({1})), 8, 1e-12);
  EXPECT_NEAR(support(t.Xfbar, vec({-1})), 3, 1e-12);
}

TEST(Tighten, TubeTooLargeThrows) {
  const LinearPlant p(vec({0.25}), vec({1}));
  const Mat K = vec({0.5});
  const TubeSpec tube = build_tube(p, K, interval(-2, 2), 3, 1, 0, 1);
  EXPECT_THROW(tighten(interval(-1, 1), interval(-20, 20), interval(-1, 1), tube, K),
               TubeTooLarge);
}

TEST(Tighten, CartPoleInputBound) {
  const LqrSolution lqr = cartpole_lqr();
  const TubeSpec tube = build_tube(testutil::cartpole_plant(), lqr.K,
                                   HPolytope::segment(0.01 * vec({0, 0, 10, 1})), 50, 7, 3);
  const TightenedSets t = tighten(tilt_band(), interval(-20, 20), tilt_band(), tube, lqr.K);
  EXPECT_NEAR(support(t.Ubar, vec({1})), oracle::tightened_input, 1e-5);
  EXPECT_NEAR(support(t.Ubar, vec({-1})), oracle::tightened_input, 1e-5);
  EXPECT_FALSE(t.Ubar.is_empty());
}

TEST(MaxAdmissible, CartPoleSetIsInvariantAndAdmissible) {
  const LqrSolution lqr = cartpole_lqr();
  const LinearPlant p = testutil::cartpole_plant();
  const Mat Acl = p.A + p.B * lqr.K;
  const HPolytope X = tilt_band();
  const HPolytope U = interval(-20, 20);
  const HPolytope O = max_admissible_set(Acl, X, U, lqr.K);
  ASSERT_FALSE(O.is_empty());
  for (int i = 0; i < O.rows(); ++i) {
    const Vec a = O.H.row(i).transpose();
    EXPECT_LE(support(O, Acl.transpose() * a), O.h(i) + 1e-7);
  }
  for (int i = 0; i < X.rows(); ++i) {
    EXPECT_LE(support(O, X.H.row(i).transpose()), X.h(i) + 1e-9);
  }
  EXPECT_LE(support_image(O, lqr.K, vec({1})), 20 + 1e-7);
  EXPECT_LE(support_image(O, lqr.K, vec({-1})), 20 + 1e-7);
}

TEST(MaxAdmissible, ScalarIsConstraintIntersection) {
  const HPolytope O = max_admissible_set(vec({0.5}), interval(-1, 1), interval(-0.4, 0.4),
                                         vec({-0.2}));
  EXPECT_NEAR(support(O, vec({1})), 1.0, 1e-12);
  EXPECT_NEAR(support(O, vec({-1})), 1.0, 1e-12);
}

TEST(TubeControl, Examples) {
  EXPECT_TRUE(tube_control(vec({0.3}), vec({1, 2}), vec({1, 2}), Mat::Ones(1, 2))
                  .isApprox(vec({0.3})));
  Mat K(1, 2);
  K << -1, 0;
  EXPECT_NEAR(tube_control(vec({0}), vec({0.5, 0}), vec({0, 0}), K)(0), -0.5, 1e-15);
}

TEST(TubeControl, CartPoleMatrixProduct) {
  const Mat K = cartpole_lqr().K;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> d(-1, 1);
  for (int k = 0; k < 50; ++k) {
    Vec x(4), xh(4);
    for (int i = 0; i < 4; ++i) {
      x(i) = d(rng);
      xh(i) = d(rng);
    }
    double want = 0.7;
    for (int i = 0; i < 4; ++i) want += K(0, i) * (x(i) - xh(i));
    EXPECT_NEAR(tube_control(vec({0.7}), x, xh, K)(0), want, 1e-12);
  }
}
