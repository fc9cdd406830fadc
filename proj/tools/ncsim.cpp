// ncsim: run, audit and sweep networked MPC scenarios.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "ncsmpc/batch.hpp"
#include "ncsmpc/config.hpp"
#include "ncsmpc/results.hpp"
#include "ncsmpc/scenario.hpp"

using namespace ncsmpc;

namespace {

constexpr int kOk = 0;
constexpr int kFindings = 1;
constexpr int kHardFailure = 2;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string mode;
  std::string script;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c, bool needs_config = true) {
  auto* opt = cmd->add_option("--config", c.config, "scenario file (YAML)");
  if (needs_config) opt->required();
  opt->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "master seed (overrides the file)");
  cmd->add_option("--mode", c.mode, "controller variant")
      ->check(CLI::IsMember({"nominal", "tube"}));
  cmd->add_option("--script", c.script, "channel script")
      ->check(CLI::IsMember({"none", "worst-case"}));
  cmd->add_option("--out", c.out, "output directory");
}

ScenarioConfig load(const Common& c) {
  ScenarioConfig cfg = load_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (!c.mode.empty()) cfg.mode = parse_mode(c.mode);
  if (!c.script.empty()) cfg.channel.script = parse_script(c.script);
  return cfg;
}

void print_warnings(const Scenario& s) {
  for (const std::string& w : s.warnings()) std::cerr << "warning: " << w << '\n';
}

void print_summary(const RunSummary& s, const AuditReport& a) {
  std::cout << "scenario " << s.scenario << " mode " << s.mode << " seed " << s.seed << '\n'
            << "steps " << s.steps << '\n'
            << "hard_failure " << (s.hard_failure ? s.failure : "none") << '\n'
            << "state_violations " << s.state_violations << " max_excess "
            << fmt17(s.max_state_excess) << '\n'
            << "input_violations " << s.input_violations << " max_excess "
            << fmt17(s.max_input_excess) << '\n'
            << "recovery_episodes " << s.recovery_episodes << " max_latency "
            << s.max_recovery_latency << " bound " << a.latency.bound << '\n'
            << "max_consecutive_losses " << s.max_consecutive_losses << '\n'
            << "error_growth_window " << a.window << '\n'
            << "predictions " << s.predictions << " infeasible " << s.infeasible_plans
            << " fallback " << s.fallback_plans << '\n'
            << "final_state";
  for (Eigen::Index i = 0; i < s.final_state.size(); ++i) std::cout << ' ' << fmt17(s.final_state(i));
  std::cout << "\nfinal_error " << fmt17(s.final_error) << '\n';
  if (s.terminal_value) {
    std::cout << "terminal_value " << fmt17(*s.terminal_value) << " inside "
              << (s.in_terminal_set ? "yes" : "no") << '\n';
  }
  std::cout << "prediction_consistency " << (a.consistency.ok ? "ok" : "FAIL") << '\n'
            << "buffer_consistency " << (a.buffer.ok ? "ok" : "FAIL") << '\n'
            << "recovery_latency " << (a.latency.ok ? "ok" : "FAIL") << '\n';
  if (a.containment) {
    std::cout << "containment " << (a.containment->ok ? "ok" : "FAIL") << " tube_violations "
              << a.containment->tube_violations << " max_tube_excess "
              << fmt17(a.containment->max_tube_excess) << '\n';
  }
  auto show = [](const std::vector<Finding>& fs) {
    for (const Finding& f : fs) std::cout << "finding " << f.check << " t=" << f.t << ": " << f.detail << '\n';
  };
  show(a.consistency.findings);
  show(a.buffer.findings);
  show(a.latency.findings);
  if (a.containment) show(a.containment->findings);
}

int exit_code(const RunSummary& s, const AuditReport& a) {
  if (s.hard_failure) return kHardFailure;
  if (!a.clean() || s.state_violations > 0 || s.input_violations > 0) return kFindings;
  return kOk;
}

int cmd_run(const Common& c) {
  const Scenario scenario(load(c));
  print_warnings(scenario);
  const RunTrace trace = scenario.run(scenario.config().seed);
  const AuditReport report = scenario.audit(trace);
  const RunSummary summary = scenario.summarize(trace, report);
  print_summary(summary, report);
  if (!c.out.empty()) emit_results(trace, summary, report, c.out);
  return exit_code(summary, report);
}

int cmd_audit(const std::string& trace_path, const Common& c) {
  std::ifstream in(trace_path);
  if (!in) throw std::runtime_error("cannot open trace " + trace_path);
  const RunTrace trace = read_trace_jsonl(in);
  AuditReport report;
  if (!c.config.empty()) {
    ScenarioConfig cfg = load(c);
    cfg.mode = parse_mode(trace.meta.mode);
    report = Scenario(cfg).audit(trace);
  } else {
    report = audit(trace);
  }
  std::cout << "steps " << trace.steps.size() << '\n'
            << "trajectories_checked " << report.consistency.trajectories_checked << '\n'
            << "prediction_consistency " << (report.consistency.ok ? "ok" : "FAIL") << '\n'
            << "buffer_consistency " << (report.buffer.ok ? "ok" : "FAIL") << '\n'
            << "recovery_latency " << (report.latency.ok ? "ok" : "FAIL") << " max "
            << report.latency.max_latency << " bound " << report.latency.bound << '\n'
            << "max_consecutive_losses " << report.max_consecutive_losses << '\n'
            << "error_growth_window " << report.window << '\n';
  if (report.containment) {
    std::cout << "containment " << (report.containment->ok ? "ok" : "FAIL") << '\n';
  }
  if (trace.hard_failure) std::cout << "hard_failure " << *trace.hard_failure << '\n';
  for (const auto* fs : {&report.consistency.findings, &report.buffer.findings,
                         &report.latency.findings}) {
    for (const Finding& f : *fs) std::cout << "finding " << f.check << " t=" << f.t << ": " << f.detail << '\n';
  }
  return report.exit_code();
}

int cmd_worst_case(Common c, std::optional<int> horizon) {
  ScenarioConfig cfg = load(c);
  cfg.channel.script = ScriptKind::worst_case;
  if (horizon) cfg.horizon = *horizon;
  const Scenario scenario(cfg);
  print_warnings(scenario);
  const WorstCaseScript w = build_worst_case_script(cfg.tau_rtt, cfg.n_loss);
  const RunTrace trace = scenario.run(cfg.seed);
  const AuditReport report = scenario.audit(trace);
  const RunSummary summary = scenario.summarize(trace, report);
  std::cout << "tau_rtt " << cfg.tau_rtt << " n_loss " << cfg.n_loss << " N " << cfg.horizon
            << '\n'
            << "designed_window " << w.window << " observed_window " << report.window << '\n'
            << "designed_latency " << cfg.n_loss + cfg.tau_rtt << " observed_latency "
            << report.latency.max_latency << '\n'
            << "tube_length " << tube_length(cfg.horizon, cfg.tau_rtt, cfg.n_loss) << '\n';
  print_summary(summary, report);
  if (!c.out.empty()) emit_results(trace, summary, report, c.out);
  return exit_code(summary, report);
}

int cmd_validate(const Common& c) {
  const ScenarioConfig cfg = load(c);
  const HorizonCheck h = validate_config(cfg.horizon, cfg.tau_rtt, cfg.n_loss);
  std::cout << "horizon " << (h.ok ? "ok" : "TOO SHORT") << ": " << h.message << '\n'
            << "tube_length " << tube_length(cfg.horizon, cfg.tau_rtt, cfg.n_loss) << '\n';
  int code = h.ok ? kOk : kFindings;
  try {
    const Scenario scenario(cfg);
    print_warnings(scenario);
    if (cfg.plant_kind != PlantKind::cstr) {
      const LqrSolution& lqr = scenario.lqr();
      std::cout << "dare_iterations " << lqr.iterations << " relative_residual "
                << fmt17(lqr.residual / (1.0 + lqr.P.norm())) << '\n'
                << "closed_loop_spectral_radius "
                << fmt17(spectral_radius(cfg.plant.A + cfg.plant.B * lqr.K)) << '\n';
    }
    if (scenario.tightened()) {
      const TightenedSets& s = *scenario.tightened();
      std::cout << "tightening ok: state rows " << s.Xbar.rows() << ", input rows "
                << s.Ubar.rows() << ", terminal rows " << s.Xfbar.rows() << '\n';
      for (int i = 0; i < s.Ubar.rows(); ++i) {
        std::cout << "input_bound " << fmt17(s.Ubar.h(i) / s.Ubar.H.row(i).norm()) << '\n';
      }
    }
  } catch (const TubeTooLarge& e) {
    std::cout << "tightening FAILED: " << e.what() << '\n';
    code = kFindings;
  }
  return code;
}

int cmd_sweep(const Common& c, std::size_t runs) {
  const Scenario scenario(load(c));
  print_warnings(scenario);
  const auto items = run_batch(scenario, seed_range(scenario.config().seed, runs));
  long hard = 0, findings = 0, state = 0, input = 0, inside = 0, errors = 0;
  int worst_latency = 0, worst_losses = 0;
  std::ofstream table;
  if (!c.out.empty()) {
    std::filesystem::create_directories(c.out);
    table.open(std::filesystem::path(c.out) / "sweep.csv");
    table << "seed,hard_failure,clean,state_violations,input_violations,max_latency,"
             "max_consecutive_losses,final_error,terminal_value\n";
  }
  for (const BatchItem& it : items) {
    if (!it.error.empty()) {
      ++errors;
      std::cerr << "seed " << it.seed << ": " << it.error << '\n';
      continue;
    }
    const RunSummary& s = it.summary;
    hard += s.hard_failure ? 1 : 0;
    findings += it.report.clean() ? 0 : 1;
    state += s.state_violations > 0 ? 1 : 0;
    input += s.input_violations > 0 ? 1 : 0;
    inside += s.in_terminal_set ? 1 : 0;
    worst_latency = std::max(worst_latency, s.max_recovery_latency);
    worst_losses = std::max(worst_losses, s.max_consecutive_losses);
    if (table) {
      table << it.seed << ',' << (s.hard_failure ? 1 : 0) << ',' << (it.report.clean() ? 1 : 0)
            << ',' << s.state_violations << ',' << s.input_violations << ','
            << s.max_recovery_latency << ',' << s.max_consecutive_losses << ','
            << fmt17(s.final_error) << ','
            << (s.terminal_value ? fmt17(*s.terminal_value) : std::string()) << '\n';
    }
  }
  std::cout << "runs " << items.size() << '\n'
            << "errors " << errors << '\n'
            << "hard_failures " << hard << '\n'
            << "runs_with_audit_findings " << findings << '\n'
            << "runs_with_state_violations " << state << '\n'
            << "runs_with_input_violations " << input << '\n'
            << "max_recovery_latency " << worst_latency << '\n'
            << "max_consecutive_losses " << worst_losses << '\n';
  if (scenario.config().plant_kind == PlantKind::cstr) {
    std::cout << "runs_inside_terminal_set " << inside << '\n';
  }
  if (errors > 0 || hard > 0) return kHardFailure;
  return findings > 0 || state > 0 || input > 0 ? kFindings : kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Networked MPC scenario runner"};
  app.require_subcommand(1);

  Common run_opts, audit_opts, wc_opts, validate_opts, sweep_opts;
  auto* run = app.add_subcommand("run", "simulate one scenario");
  add_common(run, run_opts);

  auto* audit_cmd = app.add_subcommand("audit", "audit a recorded trace");
  std::string trace_path;
  audit_cmd->add_option("trace", trace_path, "trace.jsonl")->required()->check(CLI::ExistingFile);
  add_common(audit_cmd, audit_opts, false);

  auto* wc = app.add_subcommand("worst-case", "run the adversarial delay/loss script");
  add_common(wc, wc_opts);
  std::optional<int> wc_horizon;
  wc->add_option("--horizon", wc_horizon, "override the prediction horizon");

  auto* validate = app.add_subcommand("validate", "check horizon bound and tightening");
  add_common(validate, validate_opts);

  auto* sweep = app.add_subcommand("sweep", "run a seed batch in parallel");
  add_common(sweep, sweep_opts);
  std::size_t runs = 10;
  sweep->add_option("--runs", runs, "number of seeds")->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(run_opts);
    if (*audit_cmd) return cmd_audit(trace_path, audit_opts);
    if (*wc) return cmd_worst_case(wc_opts, wc_horizon);
    if (*validate) return cmd_validate(validate_opts);
    if (*sweep) return cmd_sweep(sweep_opts, runs);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kHardFailure;
  }
  return kHardFailure;
}
