#pragma once

#include <array>
#include <memory>
#include <vector>

#include "ncsmpc/linear_system.hpp"
#include "ncsmpc/protocol.hpp"
#include "ncsmpc/tube_mpc.hpp"

namespace ncsmpc {

/// Adiabatic CSTR with three parallel Arrhenius reactions. States [T, C_A],
/// input Q (heat, kJ/h). Units: K, kmol/m^3, h.
struct CstrModel {
  double F = 4.998;      // m^3/h
  double V = 1.0;        // m^3
  double T_A0 = 300.0;   // K
  double C_A0 = 4.0;     // kmol/m^3
  std::array<double, 3> dH{-5.0e4, -5.2e4, -5.4e4};  // kJ/kmol
  std::array<double, 3> k0{3.0e6, 3.0e5, 3.0e5};     // 1/h
  std::array<double, 3> E{5.0e4, 7.53e4, 7.53e4};    // kJ/kmol
  double rho = 1000.0;   // kg/m^3
  double sigma = 1000.0; // kg/m^3
  double cp = 0.231;     // kJ/(kg K)
  double R = 8.314;      // kJ/(kmol K)
};

/// Time derivative [dT/dt, dC_A/dt]. Throws std::domain_error for T <= 0 or
/// C_A < 0.
Vec cstr_rhs(const CstrModel& m, const Vec& x, double heat, double dC_A0);

/// Analytic Jacobians (A_c, B_c) of cstr_rhs at (x, heat).
std::pair<Mat, Mat> cstr_jacobian(const CstrModel& m, const Vec& x);

/// Classical fourth-order Runge-Kutta for dx/dt = f(x) over [0, T].
template <typename Rhs>
Vec integrate_rk4(const Rhs& f, Vec x, double T, int substeps) {
  require_dims(substeps >= 1, "integrate_rk4: substeps must be positive");
  const double h = T / substeps;
  for (int k = 0; k < substeps; ++k) {
    const Vec k1 = f(x);
    const Vec k2 = f(x + 0.5 * h * k1);
    const Vec k3 = f(x + 0.5 * h * k2);
    const Vec k4 = f(x + h * k3);
    x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return x;
}

/// Classical RK4 over one sample with `substeps` equal substeps.
Vec integrate_cstr(const CstrModel& m, const Vec& x, double heat, double dC_A0,
                   double Ts, int substeps = 10);

/// Zero-order-hold discretization via the exponential of [[A, B], [0, 0]] Ts.
LinearPlant discretize(const Mat& Ac, const Mat& Bc, double Ts);

/// Operating point at temperature T: concentration from the mass balance and
/// the heat input that holds T.
struct CstrOperatingPoint {
  Vec x;
  double heat = 0.0;
};
CstrOperatingPoint cstr_operating_point(const CstrModel& m, double T);

struct LinearizedPoint {
  LinearPlant plant;
  Mat K;
};

/// Linearize and discretize at every (X[j], V[j]) and compute its LQR gain.
std::vector<LinearizedPoint> adaptive_linearize(const CstrModel& m, const std::vector<Vec>& X,
                                                const std::vector<Vec>& V, double Ts,
                                                const Mat& Q, const Mat& R);

/// Remote-side planner for the reactor: linear OCP around the operating
/// point with an ellipsoidal terminal set, nonlinear rollout of the result,
/// and optionally per-point feedback gains.
class CstrPlanner : public TrajectoryPlanner {
 public:
  struct Settings {
    double Ts = 0.025;
    int N = 10;
    Mat Q;
    Mat R;
    Vec target;           // ellipse center
    Vec ellipse_radii;    // semi-axes
    double heat_limit = 1e5;
    bool adaptive_gains = true;
  };

  CstrPlanner(CstrModel model, Settings settings);

  int horizon() const override { return settings_.N; }
  Vec predict(const Vec& x, const Vec& u) const override;
  Plan plan(const Vec& x0) override;

  const CstrOperatingPoint& operating_point() const { return op_; }
  const OcpSolver& solver() const { return *solver_; }

 private:
  CstrModel model_;
  Settings settings_;
  CstrOperatingPoint op_;
  std::shared_ptr<const OcpSolver> solver_;
};

}  // namespace ncsmpc
