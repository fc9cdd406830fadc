#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ncsmpc/netsim.hpp"
#include "ncsmpc/protocol.hpp"

namespace ncsmpc {

struct StepRecord {
  Step t = 0;
  Vec x;
  Vec u;
  Vec v_star;
  Vec x_hat;
  TrajectoryId active_id = 0;
  int index = 0;
  bool hold = false;
  int mode = 0;  // remote mode after this tick
};

enum class PacketEventKind {
  sent,
  delivered,
  dropped,
  discarded,  // measurement older than one already processed
  stale,      // control packet arrived after its desired time
  buffered,
  applied,
  rejected,   // failed the consistency test
  skipped     // remote could not predict within the horizon
};

const char* to_string(PacketEventKind k);
PacketEventKind packet_event_from_string(const std::string& s);

struct PacketEventRecord {
  Step t = 0;
  Direction dir = Direction::measurement;
  PacketEventKind kind = PacketEventKind::sent;
  TrajectoryId id = 0;     // control packets
  Step t_p = 0;            // measurement time (control: source measurement)
  Step t_pd = 0;           // control packets
  Step delivered_at = 0;   // sent events that will be delivered
  bool forced = false;
  bool late = false;
};

struct RunMeta {
  std::string scenario;
  std::string mode;  // nominal | tube
  std::uint64_t seed = 0;
  int N = 0;
  int tau_rtt = 0;
  int tau_sc = 0;
  int tau_ca = 0;
  int n_loss = 0;
  int n = 0;
  int m = 0;
  bool enforce_loss_bound = false;
  bool scripted = false;
  Step length = 0;
};

struct RunTrace {
  RunMeta meta;
  std::vector<StepRecord> steps;
  std::vector<PacketEventRecord> packets;
  std::vector<PredictionRecord> predictions;
  std::vector<PacketPtr> issued;  // control packets in send order; not part of the JSONL
  std::optional<std::string> hard_failure;
  std::optional<Step> failure_time;
};

/// One JSON object per line: a meta record, the step records, the packet
/// events, the prediction records and a closing end record.
void write_trace_jsonl(const RunTrace& trace, std::ostream& os);
RunTrace read_trace_jsonl(std::istream& is);

}  // namespace ncsmpc
