#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ncsmpc/auditor.hpp"
#include "ncsmpc/config.hpp"
#include "ncsmpc/trace.hpp"
#include "ncsmpc/tube_mpc.hpp"

namespace ncsmpc {

struct RunSummary {
  std::string scenario;
  std::string mode;
  std::uint64_t seed = 0;
  Step steps = 0;
  bool hard_failure = false;
  std::string failure;
  long state_violations = 0;
  long input_violations = 0;
  double max_state_excess = 0.0;
  double max_input_excess = 0.0;
  int recovery_episodes = 0;
  int max_recovery_latency = 0;
  int max_consecutive_losses = 0;
  long forced_deliveries = 0;
  bool loss_bound_respected = true;
  long predictions = 0;
  long infeasible_plans = 0;
  long fallback_plans = 0;
  long packets_dropped = 0;
  Vec final_state;
  double final_error = 0.0;              // distance to the regulation target
  std::optional<double> terminal_value;  // reactor: ellipse level at the end
  bool in_terminal_set = false;
};

/// A configured scenario: all offline synthesis (gain, tube, tightened sets,
/// terminal set, QP factorization) happens once in the constructor; run() is
/// const and can be called concurrently.
class Scenario {
 public:
  explicit Scenario(ScenarioConfig cfg);

  const ScenarioConfig& config() const { return cfg_; }
  /// Static gain used by the plant (zero in nominal mode).
  const Mat& feedback_gain() const { return K_plant_; }
  const LqrSolution& lqr() const { return lqr_; }
  const std::optional<TubeSpec>& tube() const { return tube_; }
  const std::optional<TightenedSets>& tightened() const { return sets_; }
  const HorizonCheck& horizon_check() const { return horizon_; }
  const std::vector<std::string>& warnings() const { return warnings_; }
  /// Run length actually simulated (the worst-case script fixes it).
  Step length() const;

  RunTrace run(std::uint64_t seed) const;
  RunSummary summarize(const RunTrace& trace, const AuditReport& report) const;
  /// Full audit, including tube containment in linear tube mode.
  AuditReport audit(const RunTrace& trace) const;

 private:
  std::shared_ptr<TrajectoryPlanner> make_planner() const;
  Vec plant_step(const Vec& x, const Vec& u, const Vec& w) const;

  ScenarioConfig cfg_;
  HorizonCheck horizon_;
  LqrSolution lqr_;
  Mat K_plant_;
  std::optional<TubeSpec> tube_;
  std::optional<TightenedSets> sets_;
  std::shared_ptr<const OcpSolver> solver_;
  std::optional<WorstCaseScript> script_;
  std::vector<std::string> warnings_;
};

/// Seed offsets for the independent random streams of one run.
struct RunSeeds {
  std::uint64_t backward, forward, disturbance;
};
RunSeeds derive_seeds(std::uint64_t master);

}  // namespace ncsmpc
