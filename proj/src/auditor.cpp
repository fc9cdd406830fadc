#include "ncsmpc/auditor.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

namespace ncsmpc {
namespace {

struct Index {
  std::map<TrajectoryId, std::vector<const PredictionRecord*>> by_id;
  std::vector<std::pair<Step, TrajectoryId>> applied;  // time order

  explicit Index(const RunTrace& trace) {
    for (const PredictionRecord& r : trace.predictions) by_id[r.id].push_back(&r);
    for (const PacketEventRecord& p : trace.packets) {
      if (p.dir == Direction::control && p.kind == PacketEventKind::applied) {
        applied.emplace_back(p.t, p.id);
      }
    }
    std::stable_sort(applied.begin(), applied.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
  }

  // Latest prediction with this ID made before time t.
  const PredictionRecord* source(TrajectoryId id, Step t) const {
    auto it = by_id.find(id);
    if (it == by_id.end()) return nullptr;
    const PredictionRecord* best = nullptr;
    for (const PredictionRecord* r : it->second) {
      if (r->tick < t) best = r;
    }
    return best;
  }
};

void sort_findings(std::vector<Finding>& f) {
  std::stable_sort(f.begin(), f.end(), [](const Finding& a, const Finding& b) { return a.t < b.t; });
}

const StepRecord* step_at(const RunTrace& trace, Step t) {
  if (trace.steps.empty()) return nullptr;
  const Step first = trace.steps.front().t;
  if (t < first || t - first >= static_cast<Step>(trace.steps.size())) return nullptr;
  return &trace.steps[static_cast<std::size_t>(t - first)];
}

}  // namespace

ConsistencyReport check_prediction_consistency(const RunTrace& trace) {
  ConsistencyReport rep;
  const Index idx(trace);

  TrajectoryId prev = 0;
  for (const PredictionRecord& r : trace.predictions) {
    if (r.id <= prev) {
      std::ostringstream msg;
      msg << "trajectory id " << r.id << " issued after id " << prev;
      rep.findings.push_back({"id-monotonic", r.tick, msg.str()});
    }
    prev = std::max(prev, r.id);
  }

  for (const auto& [t_a, id] : idx.applied) {
    const PredictionRecord* r = idx.source(id, t_a);
    ++rep.trajectories_checked;
    if (r == nullptr) {
      rep.findings.push_back({"consistency", t_a,
                              "applied trajectory " + std::to_string(id) + " has no prediction"});
      continue;
    }
    if (t_a != r->t_pd) {
      std::ostringstream msg;
      msg << "trajectory " << id << " applied at " << t_a << " but predicted for " << r->t_pd;
      rep.findings.push_back({"consistency", t_a, msg.str()});
    }
    for (const ScheduleEntry& e : r->schedule) {
      const StepRecord* s = step_at(trace, e.time);
      if (s == nullptr) continue;
      ++rep.entries_checked;
      const bool same_traj = s->active_id == e.id && (e.id == 0 ? s->hold : s->index == e.index);
      const bool same_input = s->v_star.size() == e.v.size() && s->v_star == e.v;
      if (!same_traj || !same_input) {
        std::ostringstream msg;
        msg << "trajectory " << id << " assumed (" << e.id << ", " << e.index << ") at t="
            << e.time << ", plant used (" << s->active_id << ", " << s->index << ")";
        if (same_traj) msg << " with a different input";
        rep.findings.push_back({"consistency", e.time, msg.str()});
      }
    }
  }

  for (const StepRecord& s : trace.steps) {
    if (!s.hold && s.index > trace.meta.N - 1) {
      rep.findings.push_back({"well-defined", s.t,
                              "index " + std::to_string(s.index) + " beyond horizon"});
    }
  }
  if (trace.hard_failure) {
    rep.findings.push_back({"well-defined", trace.failure_time.value_or(0), *trace.hard_failure});
  }
  sort_findings(rep.findings);
  rep.ok = rep.findings.empty();
  return rep;
}

ConsistencyReport check_buffer_consistency(const RunTrace& trace) {
  ConsistencyReport rep;
  for (const PredictionRecord& r : trace.predictions) {
    ++rep.trajectories_checked;
    for (Step s = r.source_time - trace.meta.tau_rtt; s <= r.source_time; ++s) {
      const StepRecord* st = step_at(trace, s);
      if (st == nullptr) continue;
      const BufferEntryView* belief = nullptr;
      for (const BufferEntryView& b : r.snapshot) {
        if (b.pending || b.t_pd > s) continue;
        if (belief == nullptr || b.t_pd > belief->t_pd ||
            (b.t_pd == belief->t_pd && b.id > belief->id)) {
          belief = &b;
        }
      }
      if (belief == nullptr) continue;
      ++rep.entries_checked;
      if (belief->id != st->active_id) {
        std::ostringstream msg;
        msg << "prediction " << r.id << " (tick " << r.tick << ") assumes trajectory "
            << belief->id << " active at t=" << s << ", plant had " << st->active_id;
        rep.findings.push_back({"buffer", s, msg.str()});
      }
    }
  }
  sort_findings(rep.findings);
  rep.ok = rep.findings.empty();
  return rep;
}

ContainmentReport check_error_containment(const RunTrace& trace, const HPolytope& S,
                                          const HPolytope& X, const HPolytope& U) {
  ContainmentReport rep;
  const Index idx(trace);
  std::optional<Step> first;
  if (!idx.applied.empty()) first = idx.applied.front().first;

  std::map<TrajectoryId, Step> applied_at_source;
  for (const auto& [t_a, id] : idx.applied) {
    if (const PredictionRecord* r = idx.source(id, t_a)) applied_at_source[id] = r->source_time;
  }

  for (const StepRecord& s : trace.steps) {
    if (!contains(X, s.x)) {
      ++rep.state_violations;
      rep.findings.push_back({"state", s.t, "state outside X"});
    }
    if (!contains(U, s.u)) {
      ++rep.input_violations;
      rep.findings.push_back({"input", s.t, "input outside U"});
    }
    if (s.hold || !first) continue;
    auto src = applied_at_source.find(s.active_id);
    if (src == applied_at_source.end() || src->second < *first) continue;
    ++rep.steps_checked;
    const Vec e = s.x - s.x_hat;
    const double excess = S.rows() > 0 ? (S.H * e - S.h).maxCoeff() : 0.0;
    if (excess > 1e-9) {
      ++rep.tube_violations;
      rep.max_tube_excess = std::max(rep.max_tube_excess, excess);
      std::ostringstream msg;
      msg << "error leaves the tube by " << excess;
      rep.findings.push_back({"tube", s.t, msg.str()});
    }
  }
  rep.ok = rep.tube_violations == 0 && rep.state_violations == 0 && rep.input_violations == 0;
  return rep;
}

LatencyReport check_recovery_latency(const RunTrace& trace, int tau_rtt, int n_loss) {
  LatencyReport rep;
  rep.bound = n_loss + tau_rtt;
  const Index idx(trace);
  const Step end = static_cast<Step>(trace.steps.size());

  std::map<TrajectoryId, std::vector<Step>> applied_times;
  for (const auto& [t, id] : idx.applied) applied_times[id].push_back(t);

  std::vector<Step> misses;
  for (const PredictionRecord& r : trace.predictions) {
    if (r.correction || r.t_pd >= end) continue;
    const auto it = applied_times.find(r.id);
    const bool on_time = it != applied_times.end() &&
                         std::find(it->second.begin(), it->second.end(), r.t_pd) != it->second.end();
    if (!on_time) misses.push_back(r.t_pd);
  }
  std::sort(misses.begin(), misses.end());

  std::vector<Step> corrections;
  for (const auto& [t, id] : idx.applied) {
    const PredictionRecord* r = idx.source(id, t);
    if (r != nullptr && r->correction) corrections.push_back(t);
  }

  for (Step m : misses) {
    if (!rep.episodes.empty()) {
      const Episode& last = rep.episodes.back();
      if (!last.end || m < *last.end) continue;
    }
    Episode ep;
    ep.start = m;
    auto c = std::lower_bound(corrections.begin(), corrections.end(), m);
    if (c != corrections.end()) {
      ep.end = *c;
      ep.latency = static_cast<int>(*c - m);
      rep.max_latency = std::max(rep.max_latency, ep.latency);
      if (ep.latency > rep.bound) {
        std::ostringstream msg;
        msg << "recovery took " << ep.latency << " steps, bound " << rep.bound;
        rep.findings.push_back({"latency", m, msg.str()});
      }
    } else if (end - m > rep.bound && !trace.hard_failure) {
      rep.findings.push_back({"latency", m, "recovery episode never resolved"});
    } else if (trace.hard_failure) {
      rep.findings.push_back({"latency", m, "recovery episode cut short by a hard failure"});
    }
    rep.episodes.push_back(ep);
  }

  // A remote in recovery must answer every tick, either with a correction or
  // with an explicit skip; going quiet stalls the plant on a dead branch.
  std::set<Step> answered;
  for (const PredictionRecord& r : trace.predictions) answered.insert(r.tick);
  for (const PacketEventRecord& p : trace.packets) {
    if (p.dir == Direction::control && p.kind == PacketEventKind::skipped) answered.insert(p.t);
  }
  for (std::size_t k = 1; k < trace.steps.size(); ++k) {
    const Step t = trace.steps[k].t;
    if (trace.steps[k - 1].mode != 1 || answered.count(t) != 0) continue;
    if (trace.failure_time && t >= *trace.failure_time) break;
    rep.findings.push_back({"recovery-liveness", t, "no correction issued while in recovery"});
  }
  rep.ok = rep.findings.empty();
  return rep;
}

int consecutive_loss_bound_check(const RunTrace& trace) {
  std::map<Step, bool> lost;  // measurement time -> loop lost
  std::map<std::pair<Step, TrajectoryId>, bool> forward_dropped;
  std::map<Step, bool> skipped;
  for (const PacketEventRecord& p : trace.packets) {
    if (p.dir == Direction::measurement) {
      if (p.kind == PacketEventKind::dropped || p.kind == PacketEventKind::discarded) {
        lost[p.t_p] = true;
      } else if (p.kind == PacketEventKind::delivered) {
        lost.emplace(p.t_p, false);
      }
    } else if (p.kind == PacketEventKind::dropped) {
      forward_dropped[{p.t, p.id}] = true;
    } else if (p.kind == PacketEventKind::skipped) {
      skipped[p.t_p] = true;
    }
  }
  for (const PredictionRecord& r : trace.predictions) {
    if (r.from_silence) continue;
    auto it = lost.find(r.source_time);
    if (it == lost.end() || it->second) continue;
    if (forward_dropped.count({r.tick, r.id})) it->second = true;
  }
  for (const auto& [t, flag] : skipped) {
    auto it = lost.find(t);
    if (it != lost.end()) it->second = it->second || flag;
  }
  int best = 0;
  int run = 0;
  Step prev = -1;
  for (const auto& [t, l] : lost) {
    if (t != prev + 1) run = 0;
    run = l ? run + 1 : 0;
    best = std::max(best, run);
    prev = t;
  }
  return best;
}

int error_growth_window(const RunTrace& trace) {
  const Index idx(trace);
  const Step end = static_cast<Step>(trace.steps.size());
  int best = 0;
  for (std::size_t k = 0; k < idx.applied.size(); ++k) {
    const auto& [t_a, id] = idx.applied[k];
    const PredictionRecord* r = idx.source(id, t_a);
    if (r == nullptr) continue;
    const Step retire = k + 1 < idx.applied.size() ? idx.applied[k + 1].first : end;
    best = std::max(best, static_cast<int>(retire - r->source_time));
  }
  return best;
}

bool AuditReport::clean() const {
  return consistency.ok && buffer.ok && latency.ok && (!containment || containment->ok) &&
         !hard_failure;
}

int AuditReport::exit_code() const {
  if (hard_failure) return 2;
  return clean() ? 0 : 1;
}

AuditReport audit(const RunTrace& trace, const HPolytope* S, const HPolytope* X,
                  const HPolytope* U) {
  AuditReport rep;
  rep.consistency = check_prediction_consistency(trace);
  rep.buffer = check_buffer_consistency(trace);
  rep.latency = check_recovery_latency(trace, trace.meta.tau_rtt, trace.meta.n_loss);
  if (S != nullptr && X != nullptr && U != nullptr) {
    rep.containment = check_error_containment(trace, *S, *X, *U);
  }
  rep.max_consecutive_losses = consecutive_loss_bound_check(trace);
  rep.window = error_growth_window(trace);
  rep.hard_failure = trace.hard_failure.has_value();
  return rep;
}

}  // namespace ncsmpc
