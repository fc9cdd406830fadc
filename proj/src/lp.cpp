#include "ncsmpc/lp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace ncsmpc {
namespace {

constexpr double kPivotTol = 1e-11;

struct Tableau {
  Mat T;                   // rows: constraints, last column: rhs
  std::vector<int> basis;  // basic variable per row

  int rows() const { return static_cast<int>(T.rows()); }
  int vars() const { return static_cast<int>(T.cols()) - 1; }

  void pivot(int r, int col) {
    T.row(r) /= T(r, col);
    for (int i = 0; i < rows(); ++i) {
      if (i != r && T(i, col) != 0.0) T.row(i) -= T(i, col) * T.row(r);
    }
    basis[r] = col;
  }

  // Minimizes cost'x over the columns with allowed[j]; returns false when
  // the objective is unbounded below.
  bool optimize(const Vec& cost, const std::vector<bool>& allowed) {
    const int nv = vars();
    for (int guard = 0; guard < 100000; ++guard) {
      int enter = -1;
      for (int j = 0; j < nv && enter < 0; ++j) {
        if (!allowed[j]) continue;
        double d = cost(j);
        for (int i = 0; i < rows(); ++i) d -= cost(basis[i]) * T(i, j);
        if (d < -1e-10 * (1.0 + std::abs(cost(j)))) enter = j;
      }
      if (enter < 0) return true;
      int leave = -1;
      double best = std::numeric_limits<double>::infinity();
      for (int i = 0; i < rows(); ++i) {
        if (T(i, enter) <= kPivotTol) continue;
        const double ratio = T(i, nv) / T(i, enter);
        const bool tie = leave >= 0 && std::abs(ratio - best) <= 1e-13;
        if (leave < 0 || (ratio < best && !tie) ||
            (tie && basis[i] < basis[leave])) {
          best = std::min(best, ratio);
          leave = i;
        }
      }
      if (leave < 0) return false;
      pivot(leave, enter);
    }
    return true;
  }
};

}  // namespace

LpResult solve_standard_lp(const Mat& A, const Vec& b, const Vec& c) {
  const int m = static_cast<int>(A.rows());
  const int n = static_cast<int>(A.cols());
  require_dims(b.size() == m && c.size() == n, "solve_standard_lp: shape mismatch");

  Tableau tab;
  tab.T = Mat::Zero(m, n + m + 1);
  tab.basis.resize(m);
  for (int i = 0; i < m; ++i) {
    const double sign = b(i) < 0.0 ? -1.0 : 1.0;
    tab.T.row(i).head(n) = sign * A.row(i);
    tab.T(i, n + i) = 1.0;
    tab.T(i, n + m) = sign * b(i);
    tab.basis[i] = n + i;
  }

  // Phase 1: drive the artificials to zero.
  Vec phase1 = Vec::Zero(n + m);
  phase1.tail(m).setOnes();
  std::vector<bool> allowed(n + m, true);
  tab.optimize(phase1, allowed);
  double infeas = 0.0;
  for (int i = 0; i < m; ++i) {
    if (tab.basis[i] >= n) infeas += tab.T(i, n + m);
  }
  const double scale = 1.0 + b.cwiseAbs().sum();
  LpResult out;
  if (infeas > 1e-9 * scale) {
    out.status = LpStatus::infeasible;
    return out;
  }

  // Pivot remaining artificials out; rows where that is impossible are
  // linearly dependent and dropped.
  for (int i = 0; i < tab.rows();) {
    if (tab.basis[i] < n) {
      ++i;
      continue;
    }
    int col = -1;
    for (int j = 0; j < n; ++j) {
      if (std::abs(tab.T(i, j)) > 1e-9) {
        col = j;
        break;
      }
    }
    if (col >= 0) {
      tab.pivot(i, col);
      ++i;
    } else {
      const int last = tab.rows() - 1;
      if (i != last) {
        tab.T.row(i) = tab.T.row(last);
        tab.basis[i] = tab.basis[last];
      }
      tab.T.conservativeResize(last, Eigen::NoChange);
      tab.basis.pop_back();
    }
  }

  for (int j = n; j < n + m; ++j) allowed[j] = false;
  Vec phase2 = Vec::Zero(n + m);
  phase2.head(n) = c;
  if (!tab.optimize(phase2, allowed)) {
    out.status = LpStatus::unbounded;
    return out;
  }
  out.status = LpStatus::optimal;
  out.x = Vec::Zero(n);
  for (int i = 0; i < tab.rows(); ++i) {
    if (tab.basis[i] < n) out.x(tab.basis[i]) = tab.T(i, n + m);
  }
  out.objective = c.dot(out.x);
  return out;
}

}  // namespace ncsmpc
