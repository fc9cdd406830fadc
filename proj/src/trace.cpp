#include "ncsmpc/trace.hpp"

#include <istream>
#include <ostream>
#include <stdexcept>

#include <json.hpp>

namespace ncsmpc {

using nlohmann::json;

namespace {

json vec_json(const Vec& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

Vec json_vec(const json& a) {
  Vec v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) v(static_cast<Eigen::Index>(i)) = a[i].get<double>();
  return v;
}

const char* dir_name(Direction d) {
  return d == Direction::measurement ? "measurement" : "control";
}

}  // namespace

const char* to_string(PacketEventKind k) {
  switch (k) {
    case PacketEventKind::sent: return "sent";
    case PacketEventKind::delivered: return "delivered";
    case PacketEventKind::dropped: return "dropped";
    case PacketEventKind::discarded: return "discarded";
    case PacketEventKind::stale: return "stale";
    case PacketEventKind::buffered: return "buffered";
    case PacketEventKind::applied: return "applied";
    case PacketEventKind::rejected: return "rejected";
    case PacketEventKind::skipped: return "skipped";
  }
  return "unknown";
}

PacketEventKind packet_event_from_string(const std::string& s) {
  for (auto k : {PacketEventKind::sent, PacketEventKind::delivered, PacketEventKind::dropped,
                 PacketEventKind::discarded, PacketEventKind::stale, PacketEventKind::buffered,
                 PacketEventKind::applied, PacketEventKind::rejected, PacketEventKind::skipped}) {
    if (s == to_string(k)) return k;
  }
  throw std::invalid_argument("unknown packet event kind: " + s);
}

void write_trace_jsonl(const RunTrace& trace, std::ostream& os) {
  const RunMeta& m = trace.meta;
  os << json{{"type", "meta"},         {"scenario", m.scenario}, {"mode", m.mode},
             {"seed", m.seed},         {"N", m.N},               {"tau_rtt", m.tau_rtt},
             {"tau_sc", m.tau_sc},     {"tau_ca", m.tau_ca},     {"n_loss", m.n_loss},
             {"n", m.n},               {"m", m.m},
             {"enforce_loss_bound", m.enforce_loss_bound},       {"scripted", m.scripted},
             {"length", m.length}}
            .dump()
     << '\n';
  for (const StepRecord& s : trace.steps) {
    os << json{{"type", "step"},       {"t", s.t},           {"x", vec_json(s.x)},
               {"u", vec_json(s.u)},   {"v", vec_json(s.v_star)},
               {"x_hat", vec_json(s.x_hat)},                 {"id", s.active_id},
               {"index", s.index},     {"hold", s.hold},     {"mode", s.mode}}
              .dump()
       << '\n';
  }
  for (const PacketEventRecord& p : trace.packets) {
    os << json{{"type", "packet"}, {"t", p.t},         {"dir", dir_name(p.dir)},
               {"event", to_string(p.kind)},           {"id", p.id},
               {"t_p", p.t_p},     {"t_pd", p.t_pd},   {"delivered_at", p.delivered_at},
               {"forced", p.forced}, {"late", p.late}}
              .dump()
       << '\n';
  }
  for (const PredictionRecord& r : trace.predictions) {
    json sched = json::array();
    for (const ScheduleEntry& e : r.schedule) {
      sched.push_back({{"t", e.time}, {"id", e.id}, {"index", e.index}, {"v", vec_json(e.v)}});
    }
    json snap = json::array();
    for (const BufferEntryView& b : r.snapshot) {
      snap.push_back({{"id", b.id}, {"t_pd", b.t_pd}, {"pending", b.pending}});
    }
    json rec{{"type", "predict"},
             {"tick", r.tick},
             {"t_s", r.source_time},
             {"id", r.id},
             {"t_pd", r.t_pd},
             {"i_c_last", r.i_c_last},
             {"correction", r.correction},
             {"silence", r.from_silence},
             {"mode", r.mode},
             {"status", to_string(r.status)},
             {"fallback", r.fallback},
             {"schedule", sched},
             {"snapshot", snap}};
    rec["marker"] = r.err_marker ? json(*r.err_marker) : json(nullptr);
    os << rec.dump() << '\n';
  }
  json end{{"type", "end"}, {"steps", trace.steps.size()}};
  end["hard_failure"] = trace.hard_failure ? json(*trace.hard_failure) : json(nullptr);
  end["failure_time"] = trace.failure_time ? json(*trace.failure_time) : json(nullptr);
  os << end.dump() << '\n';
}

RunTrace read_trace_jsonl(std::istream& is) {
  RunTrace trace;
  std::string line;
  bool saw_meta = false;
  bool saw_end = false;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    const std::string type = j.at("type").get<std::string>();
    if (type == "meta") {
      RunMeta& m = trace.meta;
      m.scenario = j.at("scenario").get<std::string>();
      m.mode = j.at("mode").get<std::string>();
      m.seed = j.at("seed").get<std::uint64_t>();
      m.N = j.at("N").get<int>();
      m.tau_rtt = j.at("tau_rtt").get<int>();
      m.tau_sc = j.at("tau_sc").get<int>();
      m.tau_ca = j.at("tau_ca").get<int>();
      m.n_loss = j.at("n_loss").get<int>();
      m.n = j.at("n").get<int>();
      m.m = j.at("m").get<int>();
      m.enforce_loss_bound = j.at("enforce_loss_bound").get<bool>();
      m.scripted = j.at("scripted").get<bool>();
      m.length = j.at("length").get<Step>();
      saw_meta = true;
    } else if (type == "step") {
      StepRecord s;
      s.t = j.at("t").get<Step>();
      s.x = json_vec(j.at("x"));
      s.u = json_vec(j.at("u"));
      s.v_star = json_vec(j.at("v"));
      s.x_hat = json_vec(j.at("x_hat"));
      s.active_id = j.at("id").get<TrajectoryId>();
      s.index = j.at("index").get<int>();
      s.hold = j.at("hold").get<bool>();
      s.mode = j.at("mode").get<int>();
      trace.steps.push_back(std::move(s));
    } else if (type == "packet") {
      PacketEventRecord p;
      p.t = j.at("t").get<Step>();
      p.dir = j.at("dir").get<std::string>() == "measurement" ? Direction::measurement
                                                                : Direction::control;
      p.kind = packet_event_from_string(j.at("event").get<std::string>());
      p.id = j.at("id").get<TrajectoryId>();
      p.t_p = j.at("t_p").get<Step>();
      p.t_pd = j.at("t_pd").get<Step>();
      p.delivered_at = j.at("delivered_at").get<Step>();
      p.forced = j.at("forced").get<bool>();
      p.late = j.at("late").get<bool>();
      trace.packets.push_back(p);
    } else if (type == "predict") {
      PredictionRecord r;
      r.tick = j.at("tick").get<Step>();
      r.source_time = j.at("t_s").get<Step>();
      r.id = j.at("id").get<TrajectoryId>();
      r.t_pd = j.at("t_pd").get<Step>();
      r.i_c_last = j.at("i_c_last").get<TrajectoryId>();
      r.correction = j.at("correction").get<bool>();
      r.from_silence = j.at("silence").get<bool>();
      r.mode = j.at("mode").get<int>();
      const std::string status = j.at("status").get<std::string>();
      r.status = status == "optimal"      ? QpStatus::optimal
                 : status == "infeasible" ? QpStatus::infeasible
                                          : QpStatus::max_iter;
      r.fallback = j.at("fallback").get<bool>();
      if (!j.at("marker").is_null()) r.err_marker = j.at("marker").get<TrajectoryId>();
      for (const json& e : j.at("schedule")) {
        r.schedule.push_back({e.at("t").get<Step>(), e.at("id").get<TrajectoryId>(),
                              e.at("index").get<int>(), json_vec(e.at("v"))});
      }
      for (const json& b : j.at("snapshot")) {
        r.snapshot.push_back(
            {b.at("id").get<TrajectoryId>(), b.at("t_pd").get<Step>(), b.at("pending").get<bool>()});
      }
      trace.predictions.push_back(std::move(r));
    } else if (type == "end") {
      if (!j.at("hard_failure").is_null()) trace.hard_failure = j.at("hard_failure").get<std::string>();
      if (!j.at("failure_time").is_null()) trace.failure_time = j.at("failure_time").get<Step>();
      saw_end = true;
    } else {
      throw std::invalid_argument("trace: unknown record type " + type);
    }
  }
  if (!saw_meta || !saw_end) throw std::invalid_argument("trace: incomplete (missing meta or end record)");
  return trace;
}

}  // namespace ncsmpc
