#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ncsmpc/polytope.hpp"
#include "ncsmpc/trace.hpp"

namespace ncsmpc {

struct Finding {
  std::string check;
  Step t = 0;
  std::string detail;
};

struct ConsistencyReport {
  bool ok = true;
  long trajectories_checked = 0;
  long entries_checked = 0;
  std::vector<Finding> findings;  // earliest first
};

/// Every applied trajectory must start exactly at its desired time, the
/// inputs its prediction assumed must be the ones the plant used, indices
/// must stay within the horizon and IDs must be unique and increasing.
ConsistencyReport check_prediction_consistency(const RunTrace& trace);

/// At every prediction instant the trajectories the remote believes were
/// active over the last round trip must match the plant's.
ConsistencyReport check_buffer_consistency(const RunTrace& trace);

struct ContainmentReport {
  bool ok = true;
  long tube_violations = 0;
  long state_violations = 0;
  long input_violations = 0;
  double max_tube_excess = 0.0;
  long steps_checked = 0;
  std::vector<Finding> findings;
};

/// e = x - x_hat in S for every step driven by a trajectory predicted from a
/// measurement taken after the first application; x in X and u in U always.
ContainmentReport check_error_containment(const RunTrace& trace, const HPolytope& S,
                                          const HPolytope& X, const HPolytope& U);

struct Episode {
  Step start = 0;
  std::optional<Step> end;
  int latency = 0;
};

struct LatencyReport {
  bool ok = true;
  int bound = 0;
  int max_latency = 0;
  std::vector<Episode> episodes;
  std::vector<Finding> findings;
};

/// An episode opens when a nominal trajectory is not applied at its desired
/// time and closes at the next application of a correction.
LatencyReport check_recovery_latency(const RunTrace& trace, int tau_rtt, int n_loss);

/// Longest run of consecutive lost loops (measurement and its response).
int consecutive_loss_bound_check(const RunTrace& trace);

/// Longest time from a trajectory's source measurement to its replacement.
int error_growth_window(const RunTrace& trace);

struct AuditReport {
  ConsistencyReport consistency;
  ConsistencyReport buffer;
  LatencyReport latency;
  std::optional<ContainmentReport> containment;
  int max_consecutive_losses = 0;
  int window = 0;
  bool hard_failure = false;

  bool clean() const;
  /// 0 clean, 1 findings, 2 hard failure.
  int exit_code() const;
};

AuditReport audit(const RunTrace& trace, const HPolytope* S = nullptr,
                  const HPolytope* X = nullptr, const HPolytope* U = nullptr);

}  // namespace ncsmpc
