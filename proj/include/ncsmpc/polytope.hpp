#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "ncsmpc/linear_system.hpp"
#include "ncsmpc/lp.hpp"
#include "ncsmpc/types.hpp"

namespace ncsmpc {

/// {x : H x <= h}.
struct HPolytope {
  Mat H;
  Vec h;

  HPolytope() = default;
  HPolytope(Mat normals, Vec offsets);

  int dim() const { return static_cast<int>(H.cols()); }
  int rows() const { return static_cast<int>(H.rows()); }

  static HPolytope box(const Vec& lo, const Vec& hi);
  static HPolytope symmetric_box(const Vec& half_widths);
  static HPolytope point(const Vec& p);
  /// {g d : d in [-1, 1]}, a segment through the origin (no interior for n > 1).
  static HPolytope segment(const Vec& g);

  /// Radius of the largest inscribed ball, capped at 1. Negative when empty.
  double chebyshev_radius() const;
  bool is_empty() const;
};

struct SupportResult {
  LpStatus status = LpStatus::infeasible;
  double value = 0.0;
};

/// max a'x over P, without throwing; status reports unbounded/empty.
SupportResult try_support(const HPolytope& P, const Vec& a);
/// max a'x over P. Throws std::domain_error when unbounded or empty.
double support(const HPolytope& P, const Vec& a);
/// max a'y over y in K P, i.e. support(P, K'a).
double support_image(const HPolytope& P, const Mat& K, const Vec& a);

bool contains(const HPolytope& P, const Vec& x, double tol = 1e-9);

/// Vertices of a bounded polytope by enumerating n-row subsets. Meant for
/// the small low-dimensional sets used in scenarios.
std::vector<Vec> vertices(const HPolytope& P);

/// Normalizes rows, merges parallel duplicates and drops rows whose removal
/// leaves the set unchanged (checked by LP to `tol`).
HPolytope remove_redundant(const HPolytope& P, double tol = 1e-9);

/// Outer H-representation of P + M Q. Offsets are exact supports of the sum
/// along P's normals and (for invertible M) along the mapped normals of Q.
HPolytope minkowski_sum_image(const HPolytope& P, const Mat& M, const HPolytope& Q);

/// {x : H_P x <= h_P - support(S, H_P,i)}. May be empty; query is_empty().
HPolytope pontryagin_diff(const HPolytope& P, const HPolytope& S);
HPolytope pontryagin_diff(const HPolytope& P,
                          const std::function<double(const Vec&)>& support_s);

/// Finite-sum tube: S = sum_{j=0}^{L-1} (A+BK)^j W.
struct TubeSpec {
  int L = 0;
  HPolytope S;  // outer H-rep, exact along every stored normal
  std::vector<Mat> terms;
  HPolytope W;

  /// Exact support of the finite sum.
  double support(const Vec& a) const;

  std::vector<Mat> mapped_w_vertices;  // terms[j] * [w vertices]
};

int tube_length(int horizon, int tau_rtt, int n_loss);

/// Throws std::invalid_argument if A+BK is not Schur or 0 is outside W.
TubeSpec build_tube(const LinearPlant& plant, const Mat& K, const HPolytope& W,
                    int horizon, int tau_rtt, int n_loss,
                    std::optional<int> length_override = std::nullopt);

}  // namespace ncsmpc
