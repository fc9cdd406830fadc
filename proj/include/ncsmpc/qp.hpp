#pragma once

#include <vector>

#include "ncsmpc/types.hpp"

namespace ncsmpc {

enum class QpStatus { optimal, infeasible, max_iter };

const char* to_string(QpStatus s);

struct QpResult {
  QpStatus status = QpStatus::infeasible;
  Vec x;
  Vec multipliers;            // one per constraint row, zero when inactive
  double objective = 0.0;     // 0.5 x'Hx + g'x
  int iterations = 0;
  std::vector<int> active;    // working set at exit
  std::vector<int> violated;  // infeasibility certificate: rows violated at exit
  double kkt_residual = 0.0;  // |Hx + g + G'lambda|_inf
};

/// Strictly convex QP  min 0.5 x'Hx + g'x  s.t.  G x <= d,
/// solved by a Goldfarb-Idnani dual active-set method. H and G are fixed at
/// construction so the factorizations are shared by every solve.
class DualActiveSetQp {
 public:
  DualActiveSetQp() = default;
  DualActiveSetQp(const Mat& H, const Mat& G, int max_iterations = 5000);

  QpResult solve(const Vec& g, const Vec& d) const;

  int variables() const { return static_cast<int>(H_.rows()); }
  int constraints() const { return static_cast<int>(G_.rows()); }

 private:
  Mat H_;
  Mat G_;
  Mat Hinv_;
  Mat GHinv_;   // G H^{-1}
  Mat GHinvG_;  // G H^{-1} G'
  int max_iterations_ = 5000;
};

}  // namespace ncsmpc
