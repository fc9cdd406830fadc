#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <tuple>
#include <variant>
#include <vector>

#include "ncsmpc/protocol.hpp"
#include "ncsmpc/random.hpp"
#include "ncsmpc/types.hpp"

namespace ncsmpc {

struct Verdict {
  bool dropped = false;
  Step delivered_at = 0;
  int delay = 0;
  bool forced = false;  // converted from a loss by the loop-loss guard
  bool late = false;    // sampled delay exceeded the bound
};

struct WeibullParams {
  double shape = 1.5;
  double scale = 1.0;  // in sample steps
  double mean() const;
  double variance() const;
};

/// Inverse-CDF Weibull sample.
double sample_weibull(Rng& rng, const WeibullParams& p);

/// Finite Markov chain with a row-stochastic transition matrix.
class MarkovChain {
 public:
  MarkovChain() = default;
  MarkovChain(Mat transition, int initial_state);
  int advance(Rng& rng);
  int state() const { return state_; }
  const Mat& transition() const { return P_; }

 private:
  Mat P_;
  int state_ = 0;
};

struct ChannelParams {
  Mat load_transition;                     // 3x3, low/medium/high traffic
  std::array<WeibullParams, 3> weibull;    // per load state
  Mat drop_transition;                     // 2x2, {deliver, drop}
  int tau_bar = 1;                         // delay bound in steps
  /// Deliver packets whose delay exceeds the bound instead of dropping them.
  /// Breaks the round-trip assumption; only for exercising stale handling.
  bool deliver_late = false;

  /// Illustrative defaults (not taken from measurements).
  static ChannelParams defaults(int tau_bar);
  void validate() const;
};

class Channel {
 public:
  virtual ~Channel() = default;
  virtual Verdict transmit(Step now) = 0;
  /// Delay to use if the loop-loss guard turns a loss into a delivery.
  virtual int fallback_delay() const = 0;
  virtual int bound() const = 0;
};

/// Two-chain stochastic channel. Every call advances both chains and draws a
/// delay, so the random stream does not depend on the outcome.
class StochasticChannel : public Channel {
 public:
  StochasticChannel(ChannelParams params, std::uint64_t seed);
  Verdict transmit(Step now) override;
  int fallback_delay() const override { return last_clamped_; }
  int bound() const override { return params_.tau_bar; }

 private:
  ChannelParams params_;
  Rng rng_;
  MarkovChain load_;
  MarkovChain drop_;
  int last_clamped_ = 0;
};

struct ScriptVerdict {
  bool drop = false;
  int delay = 0;
};

/// Replays verdicts keyed by send time. Sending at a time with no verdict
/// throws std::out_of_range.
class ScriptedChannel : public Channel {
 public:
  ScriptedChannel() = default;
  ScriptedChannel(std::map<Step, ScriptVerdict> verdicts, int bound);
  static ScriptedChannel from_sequence(const std::vector<ScriptVerdict>& seq, int bound);

  Verdict transmit(Step now) override;
  int fallback_delay() const override { return 0; }
  int bound() const override { return bound_; }

  void set(Step t, ScriptVerdict v) { verdicts_[t] = v; }
  const std::map<Step, ScriptVerdict>& verdicts() const { return verdicts_; }

 private:
  std::map<Step, ScriptVerdict> verdicts_;
  int bound_ = 0;
};

enum class Direction { measurement = 0, control = 1 };

using Payload = std::variant<MeasurementPacket, PacketPtr>;

/// Deliveries ordered by time, then direction (measurements first), then
/// insertion order.
class EventQueue {
 public:
  void push(Step at, Direction dir, Payload payload);
  std::vector<Payload> pop_due(Step now, Direction dir);
  std::size_t size() const { return events_.size(); }
  bool empty() const { return events_.empty(); }
  std::optional<Step> next_time() const;

 private:
  std::map<std::tuple<Step, int, std::uint64_t>, Payload> events_;
  std::uint64_t seq_ = 0;
};

/// Tracks end-to-end loop outcomes per measurement time. A loop is lost when
/// the measurement is dropped or discarded for reordering, or when the
/// packet computed from it is dropped or never sent. When enforcing, losses
/// that would make a run longer than `n_loss` are turned into deliveries.
class LoopLossGuard {
 public:
  LoopLossGuard(int n_loss, bool enforce);

  /// Backward transmission of the measurement taken at t.
  Verdict on_measurement(Step t, Verdict v, int fallback_delay);
  /// Forward transmission of the packet computed from measurement t.
  Verdict on_response(Step t, Step now, Verdict v, int fallback_delay);
  void on_no_response(Step t);
  /// Measurement t was processed by the remote (loop still pending on the response).
  void on_processed(Step t);

  int max_run() const { return max_run_; }
  long forced() const { return forced_; }
  long violations() const { return violations_; }

 private:
  enum class State { in_flight, processed, ok, lost };
  int run_if_lost(Step t) const;
  void mark_lost(Step t);

  int n_loss_;
  bool enforce_;
  std::map<Step, State> state_;
  std::map<Step, Step> arrival_;  // in-flight measurements
  int max_run_ = 0;
  long forced_ = 0;
  long violations_ = 0;
};

/// Longest run of consecutive lost loops given per-measurement outcomes
/// (true = lost), ordered by measurement time.
int longest_loss_run(const std::vector<bool>& lost);

/// Adversarial channel pair that drives the protocol through two back-to-back
/// recovery episodes with maximal open-loop error growth.
struct WorstCaseScript {
  ScriptedChannel forward;
  ScriptedChannel backward;
  int tau_rtt = 1;
  int n_loss = 0;
  int tau_sc = 0;  // backward delay bound
  int tau_ca = 1;  // forward bound, including the compute step
  Step first_drop = 0;        // desired time of the first lost nominal packet
  Step correction_time = 0;   // application time of the first correction
  Step length = 0;            // number of steps covered by the script
  int window = 0;             // expected error-growth window
};

WorstCaseScript build_worst_case_script(int tau_rtt, int n_loss, int tail = 20);

}  // namespace ncsmpc
