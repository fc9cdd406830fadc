#pragma once

#include "ncsmpc/types.hpp"

namespace ncsmpc {

enum class LpStatus { optimal, unbounded, infeasible };

struct LpResult {
  LpStatus status = LpStatus::infeasible;
  double objective = 0.0;
  Vec x;
};

/// Dense two-phase tableau simplex for  min c'x  s.t.  A x = b, x >= 0.
/// Bland's rule throughout, so degenerate problems terminate. Intended for
/// the small problems produced by the polytope module (tens of rows).
LpResult solve_standard_lp(const Mat& A, const Vec& b, const Vec& c);

}  // namespace ncsmpc
