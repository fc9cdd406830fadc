#include "ncsmpc/results.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <set>

#include <json.hpp>

#include "ncsmpc/packet_codec.hpp"

namespace ncsmpc {
namespace {

using nlohmann::json;

void vec_cells(std::ostream& os, const Vec& v, int n) {
  for (int i = 0; i < n; ++i) os << ',' << (i < v.size() ? fmt17(v(i)) : std::string());
}

json vec_json(const Vec& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

json findings_json(const std::vector<Finding>& fs) {
  json a = json::array();
  for (const Finding& f : fs) a.push_back({{"check", f.check}, {"t", f.t}, {"detail", f.detail}});
  return a;
}

std::ofstream open_out(const std::filesystem::path& p, bool binary = false) {
  std::ofstream out(p, binary ? std::ios::binary : std::ios::out);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  return out;
}

}  // namespace

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_states_csv(const RunTrace& trace, std::ostream& os) {
  const int n = trace.meta.n;
  const int m = trace.meta.m;
  os << "t";
  for (int i = 0; i < n; ++i) os << ",x" << i;
  for (int i = 0; i < m; ++i) os << ",u" << i;
  for (int i = 0; i < m; ++i) os << ",v" << i;
  for (int i = 0; i < n; ++i) os << ",x_hat" << i;
  os << ",trajectory,index,hold,mode\n";
  for (const StepRecord& s : trace.steps) {
    os << s.t;
    vec_cells(os, s.x, n);
    vec_cells(os, s.u, m);
    vec_cells(os, s.v_star, m);
    vec_cells(os, s.x_hat, n);
    os << ',' << s.active_id << ',' << s.index << ',' << (s.hold ? 1 : 0) << ',' << s.mode
       << '\n';
  }
}

void write_timeline_csv(const RunTrace& trace, std::ostream& os) {
  os << "t,direction,event,id,t_p,t_pd,delivered_at,forced,late\n";
  for (const PacketEventRecord& p : trace.packets) {
    const bool control = p.dir == Direction::control;
    os << p.t << ',' << (control ? "control" : "measurement") << ',' << to_string(p.kind) << ',';
    if (control && p.kind != PacketEventKind::skipped) os << p.id;
    os << ',' << p.t_p << ',';
    if (control && p.kind != PacketEventKind::skipped) os << p.t_pd;
    os << ',';
    if (p.kind == PacketEventKind::sent) os << p.delivered_at;
    os << ',' << (p.forced ? 1 : 0) << ',' << (p.late ? 1 : 0) << '\n';
  }
}

void write_rtt_csv(const RunTrace& trace, std::ostream& os) {
  std::set<TrajectoryId> measured;  // trajectories computed on a fresh measurement
  for (const PredictionRecord& r : trace.predictions) {
    if (!r.from_silence) measured.insert(r.id);
  }
  std::map<Step, Step> first_arrival;
  std::set<Step> sent;
  for (const PacketEventRecord& p : trace.packets) {
    if (p.dir == Direction::measurement &&
        (p.kind == PacketEventKind::sent || p.kind == PacketEventKind::dropped)) {
      sent.insert(p.t_p);
    }
    if (p.dir == Direction::control && p.kind == PacketEventKind::delivered &&
        measured.count(p.id) != 0) {
      first_arrival.emplace(p.t_p, p.t);
    }
  }
  os << "t_p,status,rtt\n";
  for (Step t : sent) {
    auto it = first_arrival.find(t);
    if (it == first_arrival.end()) {
      os << t << ",lost,\n";
    } else {
      os << t << ",ok," << (it->second - t) << '\n';
    }
  }
}

void write_summary_json(const RunSummary& s, const AuditReport& a, std::ostream& os) {
  json j{{"scenario", s.scenario},
         {"mode", s.mode},
         {"seed", s.seed},
         {"steps", s.steps},
         {"hard_failure", s.hard_failure},
         {"failure", s.failure},
         {"state_violations", s.state_violations},
         {"input_violations", s.input_violations},
         {"max_state_excess", s.max_state_excess},
         {"max_input_excess", s.max_input_excess},
         {"recovery_episodes", s.recovery_episodes},
         {"max_recovery_latency", s.max_recovery_latency},
         {"max_consecutive_losses", s.max_consecutive_losses},
         {"loss_bound_respected", s.loss_bound_respected},
         {"forced_deliveries", s.forced_deliveries},
         {"predictions", s.predictions},
         {"infeasible_plans", s.infeasible_plans},
         {"fallback_plans", s.fallback_plans},
         {"packets_dropped", s.packets_dropped},
         {"final_state", vec_json(s.final_state)},
         {"final_error", s.final_error},
         {"in_terminal_set", s.in_terminal_set}};
  j["terminal_value"] = s.terminal_value ? json(*s.terminal_value) : json(nullptr);
  json audit{{"clean", a.clean()},
             {"exit_code", a.exit_code()},
             {"prediction_consistency", a.consistency.ok},
             {"buffer_consistency", a.buffer.ok},
             {"recovery_latency", a.latency.ok},
             {"max_latency", a.latency.max_latency},
             {"latency_bound", a.latency.bound},
             {"error_growth_window", a.window},
             {"findings", findings_json(a.consistency.findings)}};
  auto& fs = audit["findings"];
  for (const auto& f : findings_json(a.buffer.findings)) fs.push_back(f);
  for (const auto& f : findings_json(a.latency.findings)) fs.push_back(f);
  if (a.containment) {
    const ContainmentReport& c = *a.containment;
    audit["containment"] = {{"ok", c.ok},
                            {"tube_violations", c.tube_violations},
                            {"state_violations", c.state_violations},
                            {"input_violations", c.input_violations},
                            {"max_tube_excess", c.max_tube_excess},
                            {"steps_checked", c.steps_checked}};
    for (const auto& f : findings_json(c.findings)) fs.push_back(f);
  }
  j["audit"] = audit;
  os << j.dump(2) << '\n';
}

void emit_results(const RunTrace& trace, const RunSummary& summary, const AuditReport& report,
                  const std::string& dir) {
  namespace fs = std::filesystem;
  const fs::path root(dir);
  fs::create_directories(root);
  {
    auto out = open_out(root / "states.csv");
    write_states_csv(trace, out);
  }
  {
    auto out = open_out(root / "timeline.csv");
    write_timeline_csv(trace, out);
  }
  {
    auto out = open_out(root / "rtt.csv");
    write_rtt_csv(trace, out);
  }
  {
    auto out = open_out(root / "summary.json");
    write_summary_json(summary, report, out);
  }
  {
    auto out = open_out(root / "trace.jsonl");
    write_trace_jsonl(trace, out);
  }
  {
    auto out = open_out(root / "packets.bin", true);
    for (const PacketPtr& p : trace.issued) {
      const std::vector<std::uint8_t> bytes = encode(*p);
      out.write(reinterpret_cast<const char*>(bytes.data()),
                static_cast<std::streamsize>(bytes.size()));
    }
  }
}

}  // namespace ncsmpc
