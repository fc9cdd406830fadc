#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "ncsmpc/batch.hpp"
#include "ncsmpc/config.hpp"
#include "ncsmpc/results.hpp"
#include "ncsmpc/scenario.hpp"
#include "test_util.hpp"

using namespace ncsmpc;
using testutil::vec;
namespace fs = std::filesystem;

namespace {

ScenarioConfig short_feasible(Step length = 200) {
  ScenarioConfig cfg = testutil::config("cartpole_feasible.yaml");
  cfg.length = length;
  return cfg;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int count_lines(const std::string& s) { return static_cast<int>(std::count(s.begin(), s.end(), '\n')); }

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("ncsmpc_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string summary_text(const BatchItem& b) {
  std::ostringstream os;
  write_summary_json(b.summary, b.report, os);
  return os.str() + b.error;
}

}  // namespace

TEST(Config, CartPoleFile) {
  const ScenarioConfig c = testutil::config("cartpole.yaml");
  EXPECT_EQ(c.plant_kind, PlantKind::cart_pole);
  EXPECT_EQ(c.mode, ControllerMode::tube);
  EXPECT_EQ(c.horizon, 50);
  EXPECT_EQ(c.tau_rtt, 7);
  EXPECT_EQ(c.n_loss, 3);
  EXPECT_EQ(c.length, 2000);
  EXPECT_TRUE(c.plant.A.isApprox(testutil::cartpole_plant().A));
  EXPECT_DOUBLE_EQ(c.Q(1, 1), 1000.0);
  EXPECT_TRUE(contains(c.U, vec({20})));
  EXPECT_FALSE(contains(c.U, vec({20.5})));
  EXPECT_FALSE(contains(c.X, vec({0, 0.21, 0, 0})));
  EXPECT_TRUE(contains(c.X, vec({1e6, 0.19, -1e6, 1e6})));
  EXPECT_EQ(c.channel.backward.tau_bar + 1 + c.channel.forward.tau_bar, 7);
}

TEST(Config, ReactorFileResolvesParameters) {
  const ScenarioConfig c = testutil::config("cstr.yaml");
  EXPECT_EQ(c.plant_kind, PlantKind::cstr);
  EXPECT_EQ(c.cstr.model.E[1], 7.53e4);
  EXPECT_EQ(c.length, 25);
  EXPECT_EQ(c.horizon, 10);
}

TEST(Config, Errors) {
  EXPECT_THROW(load_config("/nonexistent/config.yaml"), ConfigError);
  EXPECT_THROW(parse_config("scenario: submarine\n"), ConfigError);
  EXPECT_THROW(parse_config("scenario: linear\nplant:\n  A: [[1, 0], [0, 1]]\n  B: [[1], [0], [0]]\n"),
               ConfigError);
  EXPECT_THROW(parse_mode("robust"), ConfigError);
  EXPECT_THROW(parse_script("chaos"), ConfigError);
  ScenarioConfig c = testutil::config("cartpole.yaml");
  c.channel.forward.tau_bar = 6;
  EXPECT_THROW(check_config(c), ConfigError);
}

TEST(Scenario, ShortHorizonIsAWarning) {
  ScenarioConfig c = short_feasible();
  c.horizon = 16;
  const Scenario s(c);
  EXPECT_FALSE(s.horizon_check().ok);
  ASSERT_FALSE(s.warnings().empty());
  EXPECT_NE(s.warnings().front().find("horizon"), std::string::npos);
}

TEST(Scenario, SeedsAreIndependentStreams) {
  const RunSeeds a = derive_seeds(1);
  const RunSeeds b = derive_seeds(2);
  EXPECT_NE(a.backward, a.forward);
  EXPECT_NE(a.forward, a.disturbance);
  EXPECT_NE(a.backward, b.backward);
}

TEST(Scenario, TubeEqualsNominalWithoutDisturbanceOnPerfectChannel) {
  ScenarioConfig cfg = short_feasible(150);
  cfg.x0 = vec({0.05, 0.01, 0, 0});
  cfg.disturbance.kind = "zero";
  cfg.channel.perfect = true;
  ScenarioConfig nom = cfg;
  nom.mode = ControllerMode::nominal;
  const RunTrace a = Scenario(cfg).run(3);
  const RunTrace b = Scenario(nom).run(3);
  ASSERT_EQ(a.steps.size(), b.steps.size());
  for (std::size_t k = 0; k < a.steps.size(); ++k) {
    EXPECT_LT((a.steps[k].x - b.steps[k].x).cwiseAbs().maxCoeff(), 1e-12) << k;
    EXPECT_LT((a.steps[k].u - b.steps[k].u).cwiseAbs().maxCoeff(), 1e-12) << k;
  }
}

TEST(Scenario, ApplicationDelayAtLeastRoundTripBound) {
  const Scenario s(short_feasible(400));
  const RunTrace t = s.run(5);
  ASSERT_FALSE(t.predictions.empty());
  for (const PredictionRecord& p : t.predictions) {
    EXPECT_GE(p.t_pd - p.source_time, s.config().tau_rtt) << p.id;
  }
  for (const PacketEventRecord& e : t.packets) {
    if (e.dir == Direction::control && e.kind == PacketEventKind::applied) {
      EXPECT_GE(e.t - e.t_p, s.config().tau_rtt);
    }
  }
}

TEST(Scenario, FeasibleRunIsClean) {
  const Scenario s(short_feasible(600));
  const RunTrace t = s.run(11);
  const AuditReport r = s.audit(t);
  EXPECT_TRUE(r.clean());
  const RunSummary sum = s.summarize(t, r);
  EXPECT_EQ(sum.steps, 600);
  EXPECT_EQ(sum.state_violations, 0);
  EXPECT_EQ(sum.input_violations, 0);
  EXPECT_TRUE(sum.loss_bound_respected);
  EXPECT_LE(sum.max_consecutive_losses, 3);
  EXPECT_LE(sum.max_recovery_latency, 10);
}

TEST(Results, EmptyRunWritesHeadersOnly) {
  const Scenario s(short_feasible(0));
  const RunTrace t = s.run(1);
  const fs::path dir = scratch("empty");
  emit_results(t, s.summarize(t, s.audit(t)), s.audit(t), dir.string());
  EXPECT_EQ(count_lines(slurp(dir / "states.csv")), 1);
  EXPECT_EQ(count_lines(slurp(dir / "timeline.csv")), 1);
  EXPECT_EQ(count_lines(slurp(dir / "rtt.csv")), 1);
  EXPECT_TRUE(fs::exists(dir / "summary.json"));
  fs::remove_all(dir);
}

TEST(Results, OneRowPerStep) {
  const Scenario s(short_feasible(10));
  const RunTrace t = s.run(1);
  std::ostringstream os;
  write_states_csv(t, os);
  EXPECT_EQ(count_lines(os.str()), 11);
  EXPECT_EQ(os.str().rfind("t,x0,x1,x2,x3,u0,", 0), 0u);
}

TEST(Results, SeventeenSignificantDigits) {
  EXPECT_EQ(fmt17(0.1), "0.10000000000000001");
  EXPECT_EQ(std::stod(fmt17(1.0 / 3.0)), 1.0 / 3.0);
}

TEST(Results, SameSeedByteIdenticalOutputs) {
  const Scenario s(short_feasible(300));
  const fs::path a = scratch("det_a");
  const fs::path b = scratch("det_b");
  for (const fs::path& dir : {a, b}) {
    const RunTrace t = s.run(42);
    const AuditReport r = s.audit(t);
    emit_results(t, s.summarize(t, r), r, dir.string());
  }
  for (const char* f :
       {"states.csv", "timeline.csv", "rtt.csv", "summary.json", "trace.jsonl", "packets.bin"}) {
    const std::string x = slurp(a / f);
    EXPECT_FALSE(x.empty()) << f;
    EXPECT_EQ(x, slurp(b / f)) << f;
  }
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Results, DifferentSeedsDiffer) {
  const Scenario s(short_feasible(300));
  std::ostringstream a, b;
  write_states_csv(s.run(1), a);
  write_states_csv(s.run(2), b);
  EXPECT_NE(a.str(), b.str());
}

TEST(Batch, ParallelMatchesSerial) {
  const Scenario s(short_feasible(200));
  const std::vector<std::uint64_t> seeds = seed_range(100, 6);
  const auto par = run_batch(s, seeds);
  const auto ser = run_batch_serial(s, seeds);
  ASSERT_EQ(par.size(), ser.size());
  for (std::size_t i = 0; i < par.size(); ++i) {
    EXPECT_EQ(par[i].seed, seeds[i]);
    EXPECT_EQ(summary_text(par[i]), summary_text(ser[i]));
    EXPECT_EQ(par[i].summary.final_state, ser[i].summary.final_state);
  }
}

TEST(Reactor, RunCompletesWithoutProtocolFindings) {
  const Scenario s(testutil::config("cstr.yaml"));
  EXPECT_FALSE(s.warnings().empty());
  const RunTrace t = s.run(1);
  const AuditReport r = s.audit(t);
  EXPECT_TRUE(r.consistency.ok);
  EXPECT_TRUE(r.buffer.ok);
  const RunSummary sum = s.summarize(t, r);
  ASSERT_TRUE(sum.terminal_value);
  EXPECT_EQ(t.meta.n, 2);
}
