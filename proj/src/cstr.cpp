#include "ncsmpc/cstr.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <unsupported/Eigen/MatrixFunctions>

namespace ncsmpc {
namespace {

void check_physical(const Vec& x) {
  require_dims(x.size() == 2, "cstr: state must be [T, C_A]");
  if (!(x(0) > 0.0) || !(x(1) >= 0.0) || !x.allFinite()) {
    throw std::domain_error("cstr: non-physical state");
  }
}

}  // namespace

Vec cstr_rhs(const CstrModel& m, const Vec& x, double heat, double dC_A0) {
  check_physical(x);
  const double T = x(0);
  const double C = x(1);
  double heat_release = 0.0;
  double consumption = 0.0;
  for (int i = 0; i < 3; ++i) {
    const double rate = m.k0[i] * std::exp(-m.E[i] / (m.R * T));
    heat_release += -m.dH[i] / (m.rho * m.cp) * rate * C;
    consumption += rate * C;
  }
  Vec dx(2);
  dx(0) = m.F / m.V * (m.T_A0 - T) + heat_release + heat / (m.sigma * m.cp * m.V);
  dx(1) = m.F / m.V * (m.C_A0 + dC_A0 - C) - consumption;
  return dx;
}

std::pair<Mat, Mat> cstr_jacobian(const CstrModel& m, const Vec& x) {
  check_physical(x);
  const double T = x(0);
  const double C = x(1);
  Mat A = Mat::Zero(2, 2);
  A(0, 0) = -m.F / m.V;
  A(1, 1) = -m.F / m.V;
  for (int i = 0; i < 3; ++i) {
    const double rate = m.k0[i] * std::exp(-m.E[i] / (m.R * T));
    const double drate = rate * m.E[i] / (m.R * T * T);
    const double h = -m.dH[i] / (m.rho * m.cp);
    A(0, 0) += h * drate * C;
    A(0, 1) += h * rate;
    A(1, 0) -= drate * C;
    A(1, 1) -= rate;
  }
  Mat B = Mat::Zero(2, 1);
  B(0, 0) = 1.0 / (m.sigma * m.cp * m.V);
  return {A, B};
}

Vec integrate_cstr(const CstrModel& m, const Vec& x, double heat, double dC_A0, double Ts,
                   int substeps) {
  const Vec out = integrate_rk4(
      [&](const Vec& s) { return cstr_rhs(m, s, heat, dC_A0); }, x, Ts, substeps);
  check_physical(out);
  return out;
}

LinearPlant discretize(const Mat& Ac, const Mat& Bc, double Ts) {
  const auto n = Ac.rows();
  const auto m = Bc.cols();
  Mat aug = Mat::Zero(n + m, n + m);
  aug.topLeftCorner(n, n) = Ac * Ts;
  aug.topRightCorner(n, m) = Bc * Ts;
  const Mat e = aug.exp();
  return LinearPlant(e.topLeftCorner(n, n), e.topRightCorner(n, m), Ts);
}

CstrOperatingPoint cstr_operating_point(const CstrModel& m, double T) {
  double total_rate = 0.0;
  double heat_coeff = 0.0;
  for (int i = 0; i < 3; ++i) {
    const double rate = m.k0[i] * std::exp(-m.E[i] / (m.R * T));
    total_rate += rate;
    heat_coeff += -m.dH[i] / (m.rho * m.cp) * rate;
  }
  CstrOperatingPoint op;
  const double C = m.F / m.V * m.C_A0 / (m.F / m.V + total_rate);
  op.x = Vec(2);
  op.x << T, C;
  const double drift = m.F / m.V * (m.T_A0 - T) + heat_coeff * C;
  op.heat = -drift * m.sigma * m.cp * m.V;
  return op;
}

std::vector<LinearizedPoint> adaptive_linearize(const CstrModel& m, const std::vector<Vec>& X,
                                                const std::vector<Vec>& V, double Ts,
                                                const Mat& Q, const Mat& R) {
  require_dims(X.size() == V.size() + 1, "adaptive_linearize: need N+1 states for N inputs");
  std::vector<LinearizedPoint> out;
  out.reserve(V.size());
  for (std::size_t j = 0; j < V.size(); ++j) {
    const auto [Ac, Bc] = cstr_jacobian(m, X[j]);
    LinearizedPoint p{discretize(Ac, Bc, Ts), Mat()};
    p.K = solve_dare(p.plant, Q, R).K;
    out.push_back(std::move(p));
  }
  return out;
}

CstrPlanner::CstrPlanner(CstrModel model, Settings settings)
    : model_(std::move(model)), settings_(std::move(settings)) {
  require_dims(settings_.target.size() == 2 && settings_.ellipse_radii.size() == 2,
               "cstr planner: target and ellipse radii must have two entries");
  op_ = cstr_operating_point(model_, settings_.target(0));
  const auto [Ac, Bc] = cstr_jacobian(model_, op_.x);

  OcpSpec spec;
  spec.plant = discretize(Ac, Bc, settings_.Ts);
  spec.N = settings_.N;
  spec.Q = settings_.Q;
  spec.R = settings_.R;
  spec.P = Mat::Zero(2, 2);
  spec.Xbar = HPolytope(Mat::Zero(0, 2), Vec::Zero(0));
  spec.Xfbar = spec.Xbar;
  Vec lo(1), hi(1);
  lo << -settings_.heat_limit - op_.heat;
  hi << settings_.heat_limit - op_.heat;
  spec.Ubar = HPolytope::box(lo, hi);
  spec.terminal_mode = TerminalMode::terminal_set_only;
  Ellipse ell;
  ell.center = settings_.target - op_.x;
  ell.E = settings_.ellipse_radii.cwiseInverse().cwiseAbs2().asDiagonal();
  spec.terminal_ellipse = ell;
  solver_ = std::make_shared<const OcpSolver>(std::move(spec));
}

Vec CstrPlanner::predict(const Vec& x, const Vec& u) const {
  return integrate_cstr(model_, x, u(0), 0.0, settings_.Ts);
}

Plan CstrPlanner::plan(const Vec& x0) {
  const OcpSolution sol = solver_->solve(x0 - op_.x);
  Plan out;
  out.status = sol.status;
  out.X.push_back(x0);
  // Roll the plan through the nonlinear model, steering back onto the
  // linear prediction with the local LQR gain; (X, V) stay an exact pair.
  for (int j = 0; j < settings_.N; ++j) {
    const Vec& x = out.X.back();
    const auto [Ac, Bc] = cstr_jacobian(model_, x);
    Mat K = solve_dare(discretize(Ac, Bc, settings_.Ts), settings_.Q, settings_.R).K;
    Vec v = sol.V[j] + K * (x - op_.x - sol.Z[j]);
    v(0) += op_.heat;
    v(0) = std::clamp(v(0), -settings_.heat_limit, settings_.heat_limit);
    out.V.push_back(v);
    out.X.push_back(predict(x, v));
    if (settings_.adaptive_gains) out.gains.push_back(std::move(K));
  }
  return out;
}

}  // namespace ncsmpc
