#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ncsmpc/qp.hpp"
#include "ncsmpc/tube_mpc.hpp"
#include "ncsmpc/types.hpp"

namespace ncsmpc {

class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when the plant has used up the predicted inputs of its active
/// trajectory.
class HorizonExhausted : public std::runtime_error {
 public:
  HorizonExhausted(const std::string& what, Step t)
      : std::runtime_error(what), time_(t) {}
  Step time() const { return time_; }

 private:
  Step time_;
};

/// Desired application time of the initial hold trajectory (id 0).
inline constexpr Step kHoldStart = std::numeric_limits<Step>::min() / 4;

struct ControlPacket {
  TrajectoryId id = 0;
  Step t_pd = 0;                 // desired application time
  std::vector<Vec> X;            // N+1 predicted states
  std::vector<Vec> V;            // N predicted inputs
  TrajectoryId i_c_last = 0;     // trajectory assumed active right before t_pd
  std::optional<TrajectoryId> err_marker;
  std::vector<Mat> gains;        // optional per-step feedback gains
  Step source_time = 0;          // measurement the prediction started from
};

using PacketPtr = std::shared_ptr<const ControlPacket>;

struct MeasurementPacket {
  Vec x;
  Step t_p = 0;
  TrajectoryId i_p_last = 0;
};

/// Deliberate protocol mutations used to exercise the auditor.
struct ProtocolFaults {
  bool skip_consistency_check = false;   // plant applies without the i_c_last test
  bool skip_ack_prune = false;           // keep sibling corrections after an ack
  bool skip_detection_prune = false;     // keep future trajectories on detection
  bool wrong_correction_parent = false;  // corrections claim the previous ID as parent
  bool off_by_one_index = false;         // plant skips one predicted input on reuse
  bool accept_stale = false;             // plant buffers packets that arrive too late
  bool reuse_ids = false;                // corrections reuse the last issued ID
  bool silent_in_recovery = false;       // no corrections without new measurements

  bool any() const {
    return skip_consistency_check || skip_ack_prune || skip_detection_prune ||
           wrong_correction_parent || off_by_one_index || accept_stale || reuse_ids ||
           silent_in_recovery;
  }
};

enum class PlantEventKind { buffered, discarded_stale, applied, rejected, reused };

struct PlantEvent {
  PlantEventKind kind;
  TrajectoryId id;
  Step t_pd;
};

struct PlantTickResult {
  Vec u;
  Vec v_star;
  Vec x_hat;
  MeasurementPacket outgoing;
  TrajectoryId active_id = 0;
  int index = 0;          // position inside the active trajectory
  bool hold = false;      // initial hold trajectory in use
  std::vector<PlantEvent> events;
};

/// Actuator-side controller: buffer, consistency test and tube feedback.
class PlantController {
 public:
  PlantController(int horizon, Mat K, Vec hold_input, ProtocolFaults faults = {});

  /// One plant-clock step. Throws HorizonExhausted when the active
  /// trajectory has no input left for time t.
  PlantTickResult tick(Step t, const std::vector<PacketPtr>& incoming, const Vec& x_measured);

  TrajectoryId last_applied() const { return i_p_last_; }
  std::size_t buffered() const { return buffer_.size(); }

 private:
  int N_;
  Mat K_;
  Vec hold_;
  ProtocolFaults faults_;
  std::map<std::pair<Step, TrajectoryId>, PacketPtr> buffer_;
  PacketPtr active_;
  Step applied_at_ = 0;
  TrajectoryId i_p_last_ = 0;
};

/// Nominal trajectory generator used by the remote controller.
struct Plan {
  std::vector<Vec> X;
  std::vector<Vec> V;
  std::vector<Mat> gains;  // empty: static tube gain
  QpStatus status = QpStatus::optimal;
  bool fallback = false;
};

class TrajectoryPlanner {
 public:
  virtual ~TrajectoryPlanner() = default;
  virtual int horizon() const = 0;
  /// Disturbance-free one-step model used to roll measurements forward.
  virtual Vec predict(const Vec& x, const Vec& u) const = 0;
  virtual Plan plan(const Vec& x0) = 0;
};

/// Linear tube MPC planner. Infeasible OCPs fall back to the previous plan
/// shifted by one with the feedback input appended.
class LinearTubePlanner : public TrajectoryPlanner {
 public:
  LinearTubePlanner(std::shared_ptr<const OcpSolver> solver, Mat K);

  int horizon() const override { return solver_->spec().N; }
  Vec predict(const Vec& x, const Vec& u) const override;
  Plan plan(const Vec& x0) override;

  int infeasible_count() const { return infeasible_; }

 private:
  std::shared_ptr<const OcpSolver> solver_;
  Mat K_;
  std::vector<Vec> last_V_;
  int infeasible_ = 0;
};

struct ScheduleEntry {
  Step time;
  TrajectoryId id;
  int index;
  Vec v;  // nominal input assumed applied
};

struct BufferEntryView {
  TrajectoryId id;
  Step t_pd;
  bool pending;  // unacknowledged correction
};

/// Everything the remote knew and assumed when it made one prediction.
struct PredictionRecord {
  Step tick = 0;
  Step source_time = 0;
  TrajectoryId id = 0;
  Step t_pd = 0;
  TrajectoryId i_c_last = 0;
  bool correction = false;
  bool from_silence = false;
  std::optional<TrajectoryId> err_marker;
  int mode = 0;
  QpStatus status = QpStatus::optimal;
  bool fallback = false;
  std::vector<ScheduleEntry> schedule;      // [source_time, t_pd)
  std::vector<BufferEntryView> snapshot;    // buffer contents at prediction
};

struct RemoteOutput {
  PacketPtr packet;                         // null when nothing is sent
  std::optional<PredictionRecord> record;
  bool discarded = false;                   // reordered measurement
  bool skipped = false;                     // prediction would leave the horizon
};

/// Controller-side state machine: consistency test, optimistic prediction,
/// recovery mode with correction trajectories.
class RemoteController {
 public:
  RemoteController(std::shared_ptr<TrajectoryPlanner> planner, Mat K, Vec hold_input,
                   int tau_rtt, int n_loss, ProtocolFaults faults = {});

  RemoteOutput on_measurement(Step tick, const MeasurementPacket& mp);
  RemoteOutput on_silence(Step tick);

  int mode() const { return recovery_ ? 1 : 0; }
  std::optional<Step> newest_processed() const { return newest_; }
  std::size_t buffered() const { return buffer_.size(); }
  TrajectoryId last_issued() const { return next_id_ - 1; }

 private:
  struct Entry {
    PacketPtr packet;
    std::optional<TrajectoryId> marker;
  };

  const Entry& entry(TrajectoryId id) const;
  Vec input_of(const ControlPacket& p, int index, const Vec& x_hat) const;
  std::vector<BufferEntryView> snapshot() const;
  TrajectoryId active_at(Step s) const;
  RemoteOutput predict_nominal(Step tick, const MeasurementPacket& mp);
  RemoteOutput predict_correction(Step tick, const MeasurementPacket& mp, Step t_pd,
                                  bool from_silence);
  RemoteOutput emit(Step tick, const MeasurementPacket& mp, Step t_pd, Vec x_pred,
                    std::vector<ScheduleEntry> schedule, TrajectoryId i_c_last,
                    bool correction, bool from_silence);

  std::shared_ptr<TrajectoryPlanner> planner_;
  Mat K_;
  Vec hold_;
  int tau_rtt_;
  int n_loss_;
  int N_;
  ProtocolFaults faults_;
  PacketPtr hold_packet_;
  std::map<TrajectoryId, Entry> buffer_;
  bool recovery_ = false;
  TrajectoryId pending_marker_ = 0;
  TrajectoryId next_id_ = 1;
  std::optional<MeasurementPacket> last_;
  std::optional<Step> newest_;
  Step silent_ticks_ = 0;
};

/// Minimum horizon check plus the derived bounds.
struct HorizonCheck {
  bool ok = false;
  int required = 0;        // n_loss + 2 tau_rtt
  int recovery_bound = 0;  // n_loss + tau_rtt
  int tube_length = 0;     // 3 tau_rtt + 2 n_loss - 1
  std::string message;
};

HorizonCheck validate_config(int horizon, int tau_rtt, int n_loss);

}  // namespace ncsmpc
