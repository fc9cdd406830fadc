#include "ncsmpc/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Cholesky>

namespace ncsmpc {

const char* to_string(QpStatus s) {
  switch (s) {
    case QpStatus::optimal: return "optimal";
    case QpStatus::infeasible: return "infeasible";
    case QpStatus::max_iter: return "max-iter";
  }
  return "unknown";
}

DualActiveSetQp::DualActiveSetQp(const Mat& H, const Mat& G, int max_iterations)
    : H_(H), G_(G), max_iterations_(max_iterations) {
  require_dims(H.rows() == H.cols(), "qp: H must be square");
  require_dims(G.rows() == 0 || G.cols() == H.rows(), "qp: G column count must match H");
  Eigen::LLT<Mat> llt(H_);
  if (llt.info() != Eigen::Success) {
    throw std::invalid_argument("qp: Hessian is not positive definite");
  }
  Hinv_ = llt.solve(Mat::Identity(H_.rows(), H_.cols()));
  GHinv_ = G_ * Hinv_;
  GHinvG_ = GHinv_ * G_.transpose();
}

QpResult DualActiveSetQp::solve(const Vec& g, const Vec& d) const {
  const int n = variables();
  const int p = constraints();
  require_dims(g.size() == n && d.size() == p, "qp: g or d has the wrong size");

  QpResult out;
  out.x = -Hinv_ * g;
  Vec lambda = Vec::Zero(p);
  std::vector<int> active;
  std::vector<char> in_active(p, 0);
  Vec slack = d - G_ * out.x;

  const double tol = 1e-9;
  auto violation_tol = [&](int i) { return tol * (1.0 + std::abs(d(i))); };

  int iter = 0;
  for (;; ++iter) {
    if (iter >= max_iterations_) {
      out.status = QpStatus::max_iter;
      break;
    }
    slack = d - G_ * out.x;
    int add = -1;
    double worst = 0.0;
    for (int i = 0; i < p; ++i) {
      if (in_active[i]) continue;
      if (slack(i) < -violation_tol(i) && slack(i) < worst) {
        worst = slack(i);
        add = i;
      }
    }
    if (add < 0) {
      out.status = QpStatus::optimal;
      break;
    }

    bool infeasible = false;
    while (true) {
      const int a = static_cast<int>(active.size());
      Vec r(a);
      Vec dAp(a);
      for (int k = 0; k < a; ++k) dAp(k) = GHinvG_(active[k], add);
      if (a > 0) {
        Mat DAA(a, a);
        for (int i = 0; i < a; ++i)
          for (int j = 0; j < a; ++j) DAA(i, j) = GHinvG_(active[i], active[j]);
        r = DAA.ldlt().solve(dAp);
      }
      const double curvature = GHinvG_(add, add) - dAp.dot(r);

      double t_dual = std::numeric_limits<double>::infinity();
      int drop = -1;
      for (int k = 0; k < a; ++k) {
        if (r(k) > 1e-12) {
          const double ratio = lambda(active[k]) / r(k);
          if (drop < 0 || ratio < t_dual ||
              (ratio == t_dual && active[k] < active[drop])) {
            t_dual = ratio;
            drop = k;
          }
        }
      }
      const double s_add = d(add) - G_.row(add).dot(out.x);
      const bool dependent = curvature <= 1e-12 * (1.0 + GHinvG_(add, add));
      const double t_primal =
          dependent ? std::numeric_limits<double>::infinity() : -s_add / curvature;
      const double t = std::min(t_primal, t_dual);
      if (!std::isfinite(t)) {
        infeasible = true;
        break;
      }
      if (!dependent) {
        Vec dx = -GHinv_.row(add).transpose();
        for (int k = 0; k < a; ++k) dx += GHinv_.row(active[k]).transpose() * r(k);
        out.x += t * dx;
      }
      for (int k = 0; k < a; ++k) lambda(active[k]) -= t * r(k);
      lambda(add) += t;
      if (t_primal <= t_dual) {
        active.push_back(add);
        in_active[add] = 1;
        break;
      }
      lambda(active[drop]) = 0.0;
      in_active[active[drop]] = 0;
      active.erase(active.begin() + drop);
    }
    if (infeasible) {
      out.status = QpStatus::infeasible;
      out.violated = active;
      out.violated.push_back(add);
      std::sort(out.violated.begin(), out.violated.end());
      break;
    }
  }

  out.iterations = iter;
  out.multipliers = lambda;
  out.active = active;
  out.objective = 0.5 * out.x.dot(H_ * out.x) + g.dot(out.x);
  Vec stationarity = H_ * out.x + g;
  if (p > 0) stationarity += G_.transpose() * lambda;
  out.kkt_residual = n > 0 ? stationarity.cwiseAbs().maxCoeff() : 0.0;
  return out;
}

}  // namespace ncsmpc
