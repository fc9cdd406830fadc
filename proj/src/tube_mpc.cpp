#include "ncsmpc/tube_mpc.hpp"

#include <cmath>
#include <utility>

namespace ncsmpc {

TightenedSets tighten(const HPolytope& X, const HPolytope& U, const HPolytope& Xf,
                      const TubeSpec& tube, const Mat& K) {
  auto tube_support = [&tube](const Vec& a) { return tube.support(a); };
  auto input_support = [&tube, &K](const Vec& a) {
    return tube.support(K.transpose() * a);
  };
  TightenedSets out{pontryagin_diff(X, tube_support), pontryagin_diff(U, input_support),
                    pontryagin_diff(Xf, tube_support)};
  if (out.Xbar.is_empty()) throw TubeTooLarge("tube exceeds constraints: state set");
  if (out.Ubar.is_empty()) throw TubeTooLarge("tube exceeds constraints: input set");
  if (out.Xfbar.is_empty()) throw TubeTooLarge("tube exceeds constraints: terminal set");
  return out;
}

HPolytope max_admissible_set(const Mat& Acl, const HPolytope& X, const HPolytope& U,
                             const Mat& K, int max_steps) {
  const int n = static_cast<int>(Acl.rows());
  require_dims(X.dim() == n && U.dim() == K.rows() && K.cols() == n,
               "max_admissible_set: dimension mismatch");
  const int k = X.rows() + U.rows();
  Mat F(k, n);
  F << X.H, U.H * K;
  Vec f(k);
  f << X.h, U.h;

  Mat H = F;
  Vec h = f;
  Mat power = Acl;
  for (int t = 1; t <= max_steps; ++t) {
    const HPolytope current(H, h);
    const Mat candidate = F * power;
    std::vector<int> fresh;
    for (int i = 0; i < k; ++i) {
      const Vec row = candidate.row(i).transpose();
      if (row.norm() <= 1e-14 * (1.0 + F.row(i).norm())) {
        if (f(i) < 0.0) throw std::domain_error("max_admissible_set: empty");
        continue;
      }
      const SupportResult s = try_support(current, row);
      if (s.status == LpStatus::infeasible) {
        throw std::domain_error("max_admissible_set: constraint set is empty");
      }
      if (s.status == LpStatus::unbounded ||
          s.value > f(i) + 1e-9 * (1.0 + std::abs(f(i)))) {
        fresh.push_back(i);
      }
    }
    if (fresh.empty()) return remove_redundant(current);
    const auto old_rows = H.rows();
    H.conservativeResize(old_rows + static_cast<Eigen::Index>(fresh.size()), Eigen::NoChange);
    h.conservativeResize(old_rows + static_cast<Eigen::Index>(fresh.size()));
    for (std::size_t j = 0; j < fresh.size(); ++j) {
      H.row(old_rows + static_cast<Eigen::Index>(j)) = candidate.row(fresh[j]);
      h(old_rows + static_cast<Eigen::Index>(j)) = f(fresh[j]);
    }
    power = Acl * power;
  }
  throw ConvergenceError("max_admissible_set: not finitely determined", 0.0);
}

OcpSolver::OcpSolver(OcpSpec spec) : spec_(std::move(spec)) {
  const int n = spec_.plant.n();
  const int m = spec_.plant.m();
  const int N = spec_.N;
  const Mat& A = spec_.plant.A;
  const Mat& B = spec_.plant.B;
  require_dims(N >= 1, "ocp: horizon must be positive");
  require_dims(spec_.Q.rows() == n && spec_.Q.cols() == n, "ocp: Q must be n x n");
  require_dims(spec_.R.rows() == m && spec_.R.cols() == m, "ocp: R must be m x m");
  require_dims(spec_.Xbar.dim() == n && spec_.Xfbar.dim() == n && spec_.Ubar.dim() == m,
               "ocp: constraint set dimension mismatch");
  const bool terminal_cost = spec_.terminal_mode == TerminalMode::quadratic_cost;
  if (terminal_cost) {
    require_dims(spec_.P.rows() == n && spec_.P.cols() == n, "ocp: P must be n x n");
  }

  Phi_ = Mat::Zero(N * n, n);
  Gamma_ = Mat::Zero(N * n, N * m);
  Mat power = Mat::Identity(n, n);
  std::vector<Mat> AjB;  // A^j B
  for (int j = 0; j < N; ++j) {
    AjB.push_back(power * B);
    power = A * power;
    Phi_.block(j * n, 0, n, n) = power;
  }
  for (int j = 0; j < N; ++j)
    for (int i = 0; i <= j; ++i) Gamma_.block(j * n, i * m, n, m) = AjB[j - i];

  Mat Qbar = Mat::Zero(N * n, N * n);
  for (int j = 0; j + 1 < N; ++j) Qbar.block(j * n, j * n, n, n) = spec_.Q;
  if (terminal_cost) Qbar.block((N - 1) * n, (N - 1) * n, n, n) = spec_.P;
  Mat Rbar = Mat::Zero(N * m, N * m);
  for (int j = 0; j < N; ++j) Rbar.block(j * m, j * m, m, m) = spec_.R;

  H_ = 2.0 * (Gamma_.transpose() * Qbar * Gamma_ + Rbar);
  H_ = 0.5 * (H_ + H_.transpose()).eval();
  F_ = 2.0 * Gamma_.transpose() * Qbar * Phi_;
  Cz0_ = spec_.Q + Phi_.transpose() * Qbar * Phi_;

  const HPolytope& Ub = spec_.Ubar;
  const HPolytope& Xb = spec_.Xbar;
  const HPolytope& Xf = spec_.Xfbar;
  const int rows = N * Ub.rows() + (N - 1) * Xb.rows() + Xf.rows();
  G_ = Mat::Zero(rows, N * m);
  d0_ = Vec::Zero(rows);
  Dz_ = Mat::Zero(rows, n);
  int r = 0;
  for (int j = 0; j < N; ++j) {
    G_.block(r, j * m, Ub.rows(), m) = Ub.H;
    d0_.segment(r, Ub.rows()) = Ub.h;
    r += Ub.rows();
  }
  for (int j = 1; j < N; ++j) {
    G_.middleRows(r, Xb.rows()) = Xb.H * Gamma_.middleRows((j - 1) * n, n);
    d0_.segment(r, Xb.rows()) = Xb.h;
    Dz_.middleRows(r, Xb.rows()) = -Xb.H * Phi_.middleRows((j - 1) * n, n);
    r += Xb.rows();
  }
  G_.middleRows(r, Xf.rows()) = Xf.H * Gamma_.middleRows((N - 1) * n, n);
  d0_.segment(r, Xf.rows()) = Xf.h;
  Dz_.middleRows(r, Xf.rows()) = -Xf.H * Phi_.middleRows((N - 1) * n, n);

  qp_ = std::make_shared<const DualActiveSetQp>(H_, G_);
}

OcpSolution OcpSolver::solve_qp(const DualActiveSetQp& qp, const Vec& g,
                                const Vec& z0) const {
  const int m = spec_.plant.m();
  const int N = spec_.N;
  const QpResult res = qp.solve(g, d0_ + Dz_ * z0);
  OcpSolution sol;
  sol.status = res.status;
  sol.violated = res.violated;
  sol.kkt_residual = res.kkt_residual;
  sol.iterations = res.iterations;
  sol.Z.push_back(z0);
  for (int j = 0; j < N; ++j) {
    sol.V.push_back(res.x.segment(j * m, m));
    sol.Z.push_back(step_nominal(spec_.plant, sol.Z.back(), sol.V.back()));
  }
  sol.objective = 0.5 * res.x.dot(H_ * res.x) + (F_ * z0).dot(res.x) + z0.dot(Cz0_ * z0);
  return sol;
}

OcpSolution OcpSolver::solve_with_ellipse(const Vec& z0) const {
  const Ellipse& ell = *spec_.terminal_ellipse;
  const int n = spec_.plant.n();
  const int N = spec_.N;
  const Mat GN = Gamma_.middleRows((N - 1) * n, n);
  const Vec offset = Phi_.middleRows((N - 1) * n, n) * z0 - ell.center;
  const Mat curvature = 2.0 * GN.transpose() * ell.E * GN;
  const Vec gradient = 2.0 * GN.transpose() * ell.E * offset;
  const Vec g0 = F_ * z0;

  auto solve_at = [&](double mu) {
    const Mat H = H_ + mu * curvature;
    const DualActiveSetQp qp(H, G_);
    return solve_qp(qp, g0 + mu * gradient, z0);
  };

  OcpSolution best = solve_at(0.0);
  if (best.status != QpStatus::optimal || ell.value(best.Z.back()) <= 1.0) return best;

  double lo = 0.0;
  double hi = 1e-12 * (1.0 + H_.diagonal().maxCoeff());
  OcpSolution at_hi = solve_at(hi);
  int expand = 0;
  while (at_hi.status == QpStatus::optimal && ell.value(at_hi.Z.back()) > 1.0) {
    if (++expand > 200) {
      at_hi.status = QpStatus::infeasible;
      return at_hi;
    }
    lo = hi;
    hi *= 4.0;
    at_hi = solve_at(hi);
  }
  if (at_hi.status != QpStatus::optimal) return at_hi;
  for (int it = 0; it < 100 && hi - lo > 1e-12 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    OcpSolution s = solve_at(mid);
    if (s.status != QpStatus::optimal) break;
    const double v = ell.value(s.Z.back());
    if (v > 1.0) {
      lo = mid;
    } else {
      hi = mid;
      at_hi = std::move(s);
      if (v >= 1.0 - 1e-9) break;
    }
  }
  return at_hi;
}

OcpSolution OcpSolver::solve(const Vec& z0) const {
  require_dims(z0.size() == spec_.plant.n(), "ocp: z0 dimension mismatch");
  if (!z0.allFinite()) throw std::invalid_argument("ocp: z0 must be finite");
  if (spec_.terminal_mode == TerminalMode::terminal_set_only && spec_.terminal_ellipse) {
    return solve_with_ellipse(z0);
  }
  return solve_qp(*qp_, F_ * z0, z0);
}

OcpSolution solve_ocp(const OcpSpec& spec, const Vec& z0) {
  return OcpSolver(spec).solve(z0);
}

Vec tube_control(const Vec& v_star, const Vec& x, const Vec& x_hat, const Mat& K) {
  require_dims(x.size() == x_hat.size() && K.cols() == x.size() && K.rows() == v_star.size(),
               "tube_control: dimension mismatch");
  return v_star + K * (x - x_hat);
}

}  // namespace ncsmpc
