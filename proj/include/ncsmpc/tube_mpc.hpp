#pragma once

#include <memory>
#include <optional>
#include <stdexcept>
#include <vector>

#include "ncsmpc/linear_system.hpp"
#include "ncsmpc/polytope.hpp"
#include "ncsmpc/qp.hpp"

namespace ncsmpc {

enum class TerminalMode { quadratic_cost, terminal_set_only };

/// (z - center)' E (z - center) <= 1.
struct Ellipse {
  Vec center;
  Mat E;
  double value(const Vec& z) const { return (z - center).dot(E * (z - center)); }
};

struct OcpSpec {
  LinearPlant plant;
  int N = 1;
  Mat Q, R, P;
  HPolytope Xbar, Ubar, Xfbar;
  TerminalMode terminal_mode = TerminalMode::quadratic_cost;
  std::optional<Ellipse> terminal_ellipse;  // terminal_set_only mode
};

struct OcpSolution {
  std::vector<Vec> V;  // v[0..N-1]
  std::vector<Vec> Z;  // z[0..N]
  double objective = 0.0;
  QpStatus status = QpStatus::infeasible;
  std::vector<int> violated;
  double kkt_residual = 0.0;
  int iterations = 0;
};

class TubeTooLarge : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TightenedSets {
  HPolytope Xbar, Ubar, Xfbar;
};

/// X - S, U - K S, Xf - S. Throws TubeTooLarge when any result is empty.
TightenedSets tighten(const HPolytope& X, const HPolytope& U, const HPolytope& Xf,
                      const TubeSpec& tube, const Mat& K);

/// Maximal constraint-admissible invariant set of z+ = Acl z inside
/// {z in X, K z in U}. Throws ConvergenceError if not finitely determined
/// within `max_steps`.
HPolytope max_admissible_set(const Mat& Acl, const HPolytope& X, const HPolytope& U,
                             const Mat& K, int max_steps = 500);

/// Condensed OCP with prediction matrices and QP factorization built once.
/// Constraints apply to v[0..N-1], z[1..N-1] (Xbar) and z[N] (Xfbar).
class OcpSolver {
 public:
  explicit OcpSolver(OcpSpec spec);

  OcpSolution solve(const Vec& z0) const;
  const OcpSpec& spec() const { return spec_; }

 private:
  OcpSolution solve_qp(const DualActiveSetQp& qp, const Vec& g, const Vec& z0) const;
  OcpSolution solve_with_ellipse(const Vec& z0) const;

  OcpSpec spec_;
  Mat Phi_;    // stacked z[1..N] = Phi z0 + Gamma V
  Mat Gamma_;
  Mat H_;      // 2 (Gamma' Qbar Gamma + Rbar)
  Mat F_;      // gradient: g = F z0
  Mat Cz0_;    // constant cost: z0' Cz0 z0
  Mat G_;
  Vec d0_;
  Mat Dz_;     // d = d0 + Dz z0
  std::shared_ptr<const DualActiveSetQp> qp_;
};

OcpSolution solve_ocp(const OcpSpec& spec, const Vec& z0);

/// v + K (x - x_hat), deliberately unsaturated.
Vec tube_control(const Vec& v_star, const Vec& x, const Vec& x_hat, const Mat& K);

}  // namespace ncsmpc
