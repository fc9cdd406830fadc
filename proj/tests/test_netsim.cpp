#include <cmath>
#include <map>

#include <gtest/gtest.h>

#include "ncsmpc/netsim.hpp"
#include "test_util.hpp"

using namespace ncsmpc;

TEST(Scripted, ReplaysVerdictsThenThrows) {
  ScriptedChannel ch = ScriptedChannel::from_sequence({{false, 0}, {true, 0}, {false, 2}}, 2);
  const Verdict a = ch.transmit(0);
  EXPECT_FALSE(a.dropped);
  EXPECT_EQ(a.delivered_at, 0);
  EXPECT_TRUE(ch.transmit(1).dropped);
  const Verdict c = ch.transmit(2);
  EXPECT_EQ(c.delivered_at, 4);
  EXPECT_EQ(c.delay, 2);
  EXPECT_THROW(ch.transmit(3), std::out_of_range);
}

TEST(Weibull, SampleMeanWithinThreeStandardErrors) {
  Rng rng(2024);
  const WeibullParams p{1.5, 2.5};
  constexpr int n = 100000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += sample_weibull(rng, p);
  const double se = std::sqrt(p.variance() / n);
  EXPECT_NEAR(sum / n, p.mean(), 3.0 * se);
}

TEST(Weibull, ClosedFormMoments) {
  // Shape 1 is the exponential distribution.
  const WeibullParams e{1.0, 2.0};
  EXPECT_NEAR(e.mean(), 2.0, 1e-12);
  EXPECT_NEAR(e.variance(), 4.0, 1e-12);
}

TEST(Markov, EmpiricalTransitionsMatchMatrix) {
  const ChannelParams d = ChannelParams::defaults(3);
  MarkovChain chain(d.load_transition, 0);
  Rng rng(5);
  Mat counts = Mat::Zero(3, 3);
  int prev = chain.state();
  for (int k = 0; k < 300000; ++k) {
    const int next = chain.advance(rng);
    counts(prev, next) += 1.0;
    prev = next;
  }
  for (int i = 0; i < 3; ++i) {
    const double row = counts.row(i).sum();
    ASSERT_GT(row, 1000.0);
    for (int j = 0; j < 3; ++j) {
      const double p = d.load_transition(i, j);
      const double se = std::sqrt(p * (1 - p) / row);
      EXPECT_NEAR(counts(i, j) / row, p, 4.0 * se + 1e-12) << i << "," << j;
    }
  }
}

TEST(Markov, RejectsNonStochasticRows) {
  Mat P(2, 2);
  P << 0.5, 0.6, 0.5, 0.5;
  EXPECT_THROW(MarkovChain(P, 0), std::invalid_argument);
  EXPECT_THROW(MarkovChain(Mat::Identity(2, 2), 2), DimensionError);
}

TEST(Stochastic, SameSeedSameVerdicts) {
  StochasticChannel a(ChannelParams::defaults(3), 99);
  StochasticChannel b(ChannelParams::defaults(3), 99);
  for (Step t = 0; t < 1000; ++t) {
    const Verdict x = a.transmit(t);
    const Verdict y = b.transmit(t);
    EXPECT_EQ(x.dropped, y.dropped);
    EXPECT_EQ(x.delay, y.delay);
    EXPECT_EQ(x.delivered_at, y.delivered_at);
  }
}

TEST(Stochastic, DeliveredDelaysRespectBound) {
  StochasticChannel ch(ChannelParams::defaults(3), 7);
  int late = 0;
  int delivered = 0;
  for (Step t = 0; t < 20000; ++t) {
    const Verdict v = ch.transmit(t);
    if (v.late) {
      ++late;
      EXPECT_TRUE(v.dropped);
      EXPECT_GT(v.delay, 3);
    }
    if (!v.dropped) {
      ++delivered;
      EXPECT_LE(v.delivered_at - t, 3);
      EXPECT_GE(v.delivered_at - t, 1);
    }
    EXPECT_LE(ch.fallback_delay(), 3);
  }
  EXPECT_GT(late, 0);
  EXPECT_GT(delivered, 10000);
}

TEST(EventQueue, TimeThenDirectionThenInsertion) {
  EventQueue q;
  q.push(2, Direction::control, PacketPtr{});
  q.push(1, Direction::measurement, MeasurementPacket{Vec(), 10, 0});
  q.push(1, Direction::measurement, MeasurementPacket{Vec(), 11, 0});
  q.push(1, Direction::control, PacketPtr{});
  EXPECT_EQ(q.next_time(), 1);
  EXPECT_TRUE(q.pop_due(0, Direction::measurement).empty());
  const auto m = q.pop_due(1, Direction::measurement);
  ASSERT_EQ(m.size(), 2u);
  EXPECT_EQ(std::get<MeasurementPacket>(m[0]).t_p, 10);
  EXPECT_EQ(std::get<MeasurementPacket>(m[1]).t_p, 11);
  EXPECT_EQ(q.pop_due(5, Direction::control).size(), 2u);
  EXPECT_TRUE(q.empty());
}

namespace {

// Drives the guard the way the scenario loop does and recomputes every
// loop outcome independently of the guard's own bookkeeping.
int longest_run_with_guard(bool enforce, int n_loss, std::uint64_t seed, long* forced) {
  ChannelParams params = ChannelParams::defaults(2);
  params.drop_transition << 0.80, 0.20,
                            0.30, 0.70;
  StochasticChannel backward(params, seed);
  StochasticChannel forward(params, seed + 1);
  LoopLossGuard guard(n_loss, enforce);
  std::map<Step, std::vector<Step>> arrivals;
  std::map<Step, bool> lost;
  Step newest = -1;
  constexpr Step kSteps = 10000;
  for (Step t = 0; t < kSteps; ++t) {
    const Verdict v = guard.on_measurement(t, backward.transmit(t), backward.fallback_delay());
    if (v.dropped) {
      lost[t] = true;
    } else {
      arrivals[v.delivered_at].push_back(t);
    }
    auto due = arrivals.find(t);
    if (due == arrivals.end()) continue;
    std::sort(due->second.begin(), due->second.end());
    for (Step s : due->second) {
      if (s <= newest) {
        lost[s] = true;
        continue;
      }
      newest = s;
      guard.on_processed(s);
      const Verdict r = guard.on_response(s, t + 1, forward.transmit(t), forward.fallback_delay());
      lost[s] = r.dropped;
    }
  }
  std::vector<bool> seq;
  for (Step t = 0; t < kSteps - 4; ++t) seq.push_back(lost.count(t) ? lost[t] : false);
  if (forced != nullptr) *forced = guard.forced();
  return longest_loss_run(seq);
}

}  // namespace

TEST(LossGuard, EnforcedRunsNeverExceedBound) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    long forced = 0;
    EXPECT_LE(longest_run_with_guard(true, 2, seed, &forced), 2) << seed;
    EXPECT_GT(forced, 0);
  }
}

TEST(LossGuard, UnenforcedChannelExceedsBound) {
  EXPECT_GT(longest_run_with_guard(false, 2, 1, nullptr), 2);
}

TEST(LossGuard, LongestRun) {
  EXPECT_EQ(longest_loss_run({}), 0);
  EXPECT_EQ(longest_loss_run({true, true, false, true, true, true, false}), 3);
}

TEST(WorstCase, ScriptGeometry) {
  const WorstCaseScript w = build_worst_case_script(2, 2);
  EXPECT_EQ(w.window, 9);
  EXPECT_EQ(w.tau_sc + w.tau_ca, 2);
  EXPECT_EQ(w.correction_time, w.first_drop + 2 + 2 - 1);
  for (const auto& [t, v] : w.backward.verdicts()) EXPECT_LE(v.delay, w.tau_sc) << t;
  for (const auto& [t, v] : w.forward.verdicts()) EXPECT_EQ(v.delay, 0) << t;
  EXPECT_EQ(static_cast<Step>(w.forward.verdicts().size()), w.length);
  EXPECT_EQ(build_worst_case_script(7, 3).window, 26);
  EXPECT_THROW(build_worst_case_script(0, 1), std::invalid_argument);
}
