#include <memory>

#include <gtest/gtest.h>

#include "ncsmpc/packet_codec.hpp"
#include "ncsmpc/protocol.hpp"
#include "test_util.hpp"

using namespace ncsmpc;
using testutil::vec;

namespace {

// Scalar integrator whose plans are tagged with a call counter, so every
// input identifies the plan it came from.
class TaggedPlanner : public TrajectoryPlanner {
 public:
  explicit TaggedPlanner(int N) : N_(N) {}
  int horizon() const override { return N_; }
  Vec predict(const Vec& x, const Vec& u) const override { return x + u; }
  Plan plan(const Vec& x0) override {
    ++calls;
    Plan p;
    p.X.push_back(x0);
    for (int j = 0; j < N_; ++j) {
      p.V.push_back(vec({100.0 * calls + j}));
      p.X.push_back(p.X.back() + p.V.back());
    }
    last_x0 = x0;
    return p;
  }
  int calls = 0;
  Vec last_x0;

 private:
  int N_;
};

PacketPtr packet(TrajectoryId id, Step t_pd, TrajectoryId i_c_last, int N = 5) {
  auto p = std::make_shared<ControlPacket>();
  p->id = id;
  p->t_pd = t_pd;
  p->i_c_last = i_c_last;
  for (int j = 0; j < N; ++j) {
    p->V.push_back(vec({10.0 * id + j}));
    p->X.push_back(vec({0.0}));
  }
  p->X.push_back(vec({0.0}));
  return p;
}

PlantController plant(int N = 5) { return PlantController(N, Mat::Zero(1, 1), vec({0})); }

bool has_event(const PlantTickResult& r, PlantEventKind k, TrajectoryId id) {
  for (const PlantEvent& e : r.events) {
    if (e.kind == k && e.id == id) return true;
  }
  return false;
}

}  // namespace

TEST(Plant, HoldsUntilFirstTrajectory) {
  PlantController pc = plant();
  const PlantTickResult r = pc.tick(0, {}, vec({0.3}));
  EXPECT_TRUE(r.hold);
  EXPECT_EQ(r.u(0), 0.0);
  EXPECT_EQ(r.outgoing.t_p, 0);
  EXPECT_EQ(r.outgoing.i_p_last, 0u);
  EXPECT_TRUE(r.outgoing.x.isApprox(vec({0.3})));
}

TEST(Plant, NominalFlowAppliesFirstInput) {
  PlantController pc = plant();
  PlantTickResult r = pc.tick(1, {packet(1, 2, 0)}, vec({0}));
  EXPECT_TRUE(has_event(r, PlantEventKind::buffered, 1));
  EXPECT_TRUE(r.hold);
  r = pc.tick(2, {}, vec({0}));
  EXPECT_TRUE(has_event(r, PlantEventKind::applied, 1));
  EXPECT_EQ(r.index, 0);
  EXPECT_EQ(r.u(0), 10.0);
  EXPECT_EQ(r.outgoing.i_p_last, 1u);
  EXPECT_EQ(pc.last_applied(), 1u);
}

TEST(Plant, DropoutReusesNextPredictedInput) {
  PlantController pc = plant();
  pc.tick(2, {packet(1, 2, 0)}, vec({0}));
  const PlantTickResult r = pc.tick(3, {}, vec({0}));
  EXPECT_TRUE(has_event(r, PlantEventKind::reused, 1));
  EXPECT_EQ(r.index, 1);
  EXPECT_EQ(r.u(0), 11.0);
}

TEST(Plant, HorizonExhaustion) {
  PlantController pc = plant(3);
  pc.tick(0, {packet(1, 0, 0, 3)}, vec({0}));
  pc.tick(1, {}, vec({0}));
  pc.tick(2, {}, vec({0}));
  try {
    pc.tick(3, {}, vec({0}));
    FAIL() << "expected HorizonExhausted";
  } catch (const HorizonExhausted& e) {
    EXPECT_EQ(e.time(), 3);
  }
}

TEST(Plant, TubeFeedbackUsesPredictedState) {
  PlantController pc(5, vec({-2.0}), vec({0}));
  auto p = std::make_shared<ControlPacket>(*packet(1, 0, 0));
  p->X[0] = vec({0.25});
  const PlantTickResult r = pc.tick(0, {p}, vec({1.0}));
  EXPECT_DOUBLE_EQ(r.u(0), 10.0 - 2.0 * 0.75);
}

TEST(Plant, InconsistentPacketAndLaterOnesDeleted) {
  PlantController pc = plant();
  pc.tick(0, {packet(1, 0, 0)}, vec({0}));
  // Trajectory 2 (for t=1) was lost; 3 and 4 assume it was applied.
  PlantTickResult r = pc.tick(1, {packet(3, 2, 2), packet(4, 3, 3)}, vec({0}));
  EXPECT_TRUE(has_event(r, PlantEventKind::reused, 1));
  r = pc.tick(2, {}, vec({0}));
  EXPECT_TRUE(has_event(r, PlantEventKind::rejected, 3));
  EXPECT_TRUE(has_event(r, PlantEventKind::rejected, 4));
  EXPECT_EQ(r.active_id, 1u);
  EXPECT_EQ(r.index, 2);
  EXPECT_EQ(pc.buffered(), 0u);
  // A correction that names trajectory 1 as its parent is accepted.
  r = pc.tick(3, {packet(5, 3, 1)}, vec({0}));
  EXPECT_TRUE(has_event(r, PlantEventKind::applied, 5));
  EXPECT_EQ(r.u(0), 50.0);
}

TEST(Plant, StalePacketsDiscarded) {
  PlantController pc = plant();
  pc.tick(0, {packet(1, 0, 0)}, vec({0}));
  const PlantTickResult r = pc.tick(2, {packet(2, 1, 1)}, vec({0}));
  EXPECT_TRUE(has_event(r, PlantEventKind::discarded_stale, 2));
  EXPECT_EQ(r.active_id, 1u);
}

TEST(Plant, SameTickArrivalsProcessedInOrder) {
  PlantController pc = plant();
  // Delivered together and out of order: 1 at t=0, then 2 chained on 1.
  const PlantTickResult r = pc.tick(0, {packet(2, 1, 1), packet(1, 0, 0)}, vec({0}));
  EXPECT_TRUE(has_event(r, PlantEventKind::applied, 1));
  const PlantTickResult s = pc.tick(1, {}, vec({0}));
  EXPECT_TRUE(has_event(s, PlantEventKind::applied, 2));
}

class RemoteFixture : public ::testing::Test {
 protected:
  static constexpr int kTau = 2;
  std::shared_ptr<TaggedPlanner> planner = std::make_shared<TaggedPlanner>(8);
  RemoteController rc{planner, Mat::Zero(1, 1), vec({0}), kTau, 2};

  RemoteOutput measure(Step t, TrajectoryId i_p_last, double x = 0.0) {
    return rc.on_measurement(t, MeasurementPacket{vec({x}), t, i_p_last});
  }
};

TEST_F(RemoteFixture, SteadyNominalStream) {
  RemoteOutput a = measure(0, 0);
  RemoteOutput b = measure(1, 0);
  RemoteOutput c = measure(2, 1);
  ASSERT_TRUE(a.packet && b.packet && c.packet);
  EXPECT_EQ(a.packet->id, 1u);
  EXPECT_EQ(b.packet->id, 2u);
  EXPECT_EQ(c.packet->id, 3u);
  EXPECT_EQ(a.packet->t_pd, 2);
  EXPECT_EQ(b.packet->t_pd, 3);
  EXPECT_EQ(c.packet->t_pd, 4);
  EXPECT_EQ(a.packet->i_c_last, 0u);
  EXPECT_EQ(b.packet->i_c_last, 1u);
  EXPECT_EQ(c.packet->i_c_last, 2u);
  EXPECT_EQ(rc.mode(), 0);
}

TEST_F(RemoteFixture, OptimisticPredictionUsesSentInputs) {
  measure(0, 0);
  measure(1, 0);
  // From x=1 at t=2: step 2 uses trajectory 1 index 0 (input 100), step 3
  // uses trajectory 2 index 0 (input 200).
  const RemoteOutput c = measure(2, 1, 1.0);
  EXPECT_DOUBLE_EQ(planner->last_x0(0), 1.0 + 100.0 + 200.0);
  ASSERT_EQ(c.record->schedule.size(), 2u);
  EXPECT_EQ(c.record->schedule[0].id, 1u);
  EXPECT_EQ(c.record->schedule[1].id, 2u);
}

TEST_F(RemoteFixture, ForwardDropTriggersCorrection) {
  measure(0, 0);
  measure(1, 0);
  measure(2, 1);
  // Trajectory 2 (for t=3) never arrived: the plant still reports 1.
  const RemoteOutput r = measure(3, 1, 0.5);
  ASSERT_TRUE(r.packet);
  EXPECT_EQ(rc.mode(), 1);
  EXPECT_TRUE(r.record->correction);
  EXPECT_EQ(r.packet->i_c_last, 1u);
  ASSERT_TRUE(r.packet->err_marker);
  EXPECT_EQ(*r.packet->err_marker, 1u);
  EXPECT_EQ(r.packet->t_pd, 3 + kTau);
  // Pessimistic rollout on trajectory 1 only: indices 1 and 2.
  EXPECT_DOUBLE_EQ(planner->last_x0(0), 0.5 + 101.0 + 102.0);
}

TEST_F(RemoteFixture, SilenceInRecoveryRepeatsCorrections) {
  measure(0, 0);
  measure(1, 0);
  measure(2, 1);
  measure(3, 1);
  std::vector<TrajectoryId> ids;
  for (Step k = 1; k <= 3; ++k) {
    const RemoteOutput s = rc.on_silence(3 + k);
    ASSERT_TRUE(s.packet);
    EXPECT_TRUE(s.record->from_silence);
    EXPECT_EQ(*s.packet->err_marker, 1u);
    EXPECT_EQ(s.packet->t_pd, 3 + kTau + k);
    ids.push_back(s.packet->id);
  }
  EXPECT_LT(ids[0], ids[1]);
  EXPECT_LT(ids[1], ids[2]);
}

TEST_F(RemoteFixture, AcknowledgementEndsRecovery) {
  measure(0, 0);
  measure(1, 0);
  measure(2, 1);
  const TrajectoryId c1 = measure(3, 1).packet->id;
  const TrajectoryId c2 = rc.on_silence(4).packet->id;
  const TrajectoryId c3 = rc.on_silence(5).packet->id;
  // The plant applied c1 at t=5 and reports it.
  const RemoteOutput ack = measure(5, c1);
  EXPECT_EQ(rc.mode(), 0);
  ASSERT_TRUE(ack.packet);
  EXPECT_FALSE(ack.record->correction);
  EXPECT_EQ(ack.packet->i_c_last, c1);
  for (const BufferEntryView& b : ack.record->snapshot) {
    EXPECT_NE(b.id, c2);
    EXPECT_NE(b.id, c3);
  }
  EXPECT_FALSE(rc.on_silence(6).packet);
}

TEST_F(RemoteFixture, IdleWithoutMeasurements) {
  EXPECT_FALSE(rc.on_silence(0).packet);
  measure(0, 0);
  EXPECT_FALSE(rc.on_silence(1).packet);
}

TEST_F(RemoteFixture, ReorderedMeasurementDiscarded) {
  measure(3, 0);
  const RemoteOutput r = measure(2, 0);
  EXPECT_TRUE(r.discarded);
  EXPECT_FALSE(r.packet);
  EXPECT_EQ(*rc.newest_processed(), 3);
}

TEST_F(RemoteFixture, UnknownTrajectoryIsProtocolError) {
  measure(0, 0);
  EXPECT_THROW(measure(1, 42), ProtocolError);
}

TEST(ProtocolLoop, ScriptedSixStepTrace) {
  // Perfect loop with tau_rtt = 2 except the forward packet sent at t=1 is
  // lost. Plant and remote are wired by hand so every hand-off is explicit.
  auto planner = std::make_shared<TaggedPlanner>(8);
  RemoteController rc(planner, Mat::Zero(1, 1), vec({0}), 2, 2);
  PlantController pc(8, Mat::Zero(1, 1), vec({0}));
  std::map<Step, std::vector<PacketPtr>> inbox;
  std::vector<TrajectoryId> active;
  for (Step t = 0; t < 8; ++t) {
    const PlantTickResult r = pc.tick(t, inbox[t], vec({0}));
    active.push_back(r.hold ? 0 : r.active_id);
    const RemoteOutput out = rc.on_measurement(t, r.outgoing);
    if (out.packet && t != 1) inbox[t + 1].push_back(out.packet);
  }
  // 1 runs at t=2; 2 (t=3) is lost; 3 (t=4) is rejected; correction 4 from
  // t=3 lands at t=5 and its sibling 5 is rejected at t=6; nominal 6 resumes.
  const std::vector<TrajectoryId> want = {0, 0, 1, 1, 1, 4, 4, 6};
  EXPECT_EQ(active, want);
}

TEST(ValidateConfig, HorizonBound) {
  EXPECT_TRUE(validate_config(10, 4, 2).ok);
  const HorizonCheck c = validate_config(50, 7, 3);
  EXPECT_TRUE(c.ok);
  EXPECT_EQ(c.required, 17);
  EXPECT_EQ(c.recovery_bound, 10);
  EXPECT_EQ(c.tube_length, 26);
  EXPECT_FALSE(validate_config(9, 4, 2).ok);
}

TEST(Codec, ControlRoundTrip) {
  auto p = std::make_shared<ControlPacket>(*packet(7, 12, 6));
  p->err_marker = 3;
  p->source_time = 9;
  p->gains = {Mat::Constant(1, 1, -1.5), Mat::Constant(1, 1, 0.1)};
  p->V[2] = vec({0.1 + 0.2});
  const std::vector<std::uint8_t> buf = encode(*p);
  std::size_t off = 0;
  const ControlPacket q = decode_control(buf, off);
  EXPECT_EQ(off, buf.size());
  EXPECT_EQ(q.id, 7u);
  EXPECT_EQ(q.t_pd, 12);
  EXPECT_EQ(q.i_c_last, 6u);
  EXPECT_EQ(q.err_marker, p->err_marker);
  EXPECT_EQ(q.source_time, 9);
  ASSERT_EQ(q.V.size(), p->V.size());
  EXPECT_EQ(q.V[2](0), 0.1 + 0.2);
  ASSERT_EQ(q.gains.size(), 2u);
  EXPECT_EQ(q.gains[0](0, 0), -1.5);
}

TEST(Codec, MeasurementRoundTripAndErrors) {
  const MeasurementPacket m{vec({1.0 / 3.0, -2.0}), 41, 5};
  std::vector<std::uint8_t> buf = encode(m);
  std::size_t off = 0;
  const MeasurementPacket n = decode_measurement(buf, off);
  EXPECT_EQ(n.t_p, 41);
  EXPECT_EQ(n.i_p_last, 5u);
  EXPECT_EQ(n.x(0), 1.0 / 3.0);
  off = 0;
  EXPECT_THROW(decode_control(buf, off), CodecError);
  std::vector<std::uint8_t> cut(buf.begin(), buf.end() - 3);
  off = 0;
  EXPECT_THROW(decode_measurement(cut, off), CodecError);
  buf[4] = 99;
  off = 0;
  EXPECT_THROW(decode_measurement(buf, off), CodecError);
}
