#include "ncsmpc/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ncsmpc/cstr.hpp"
#include "ncsmpc/disturbance.hpp"
#include "ncsmpc/random.hpp"

namespace ncsmpc {
namespace {

/// Delivers every packet after its minimal delay.
class PerfectChannel : public Channel {
 public:
  Verdict transmit(Step now) override {
    Verdict v;
    v.delivered_at = now;
    return v;
  }
  int fallback_delay() const override { return 0; }
  int bound() const override { return 0; }
};

PacketEventKind plant_event_kind(PlantEventKind k) {
  switch (k) {
    case PlantEventKind::buffered: return PacketEventKind::buffered;
    case PlantEventKind::discarded_stale: return PacketEventKind::stale;
    case PlantEventKind::applied: return PacketEventKind::applied;
    case PlantEventKind::rejected: return PacketEventKind::rejected;
    case PlantEventKind::reused: break;
  }
  return PacketEventKind::applied;
}

HPolytope disturbance_set(const DisturbanceConfig& d, int n) {
  if (d.kind == "scalar") return HPolytope::segment(d.amplitude * d.direction);
  if (d.kind == "uniform") return HPolytope::box(d.lower, d.upper);
  return HPolytope::point(Vec::Zero(n));
}

double excess(const HPolytope& P, const Vec& x) {
  if (P.rows() == 0) return 0.0;
  return std::max(0.0, (P.H * x - P.h).maxCoeff());
}

}  // namespace

RunSeeds derive_seeds(std::uint64_t master) {
  constexpr std::uint64_t golden = 0x9E3779B97F4A7C15ULL;
  return {master + golden, master + 2 * golden, master + 3 * golden};
}

Scenario::Scenario(ScenarioConfig cfg) : cfg_(std::move(cfg)) {
  check_config(cfg_);
  horizon_ = validate_config(cfg_.horizon, cfg_.tau_rtt, cfg_.n_loss);
  if (!horizon_.ok) warnings_.push_back("horizon below the minimum: " + horizon_.message);

  if (cfg_.channel.script == ScriptKind::worst_case) {
    script_ = build_worst_case_script(cfg_.tau_rtt, cfg_.n_loss);
  }

  if (cfg_.plant_kind == PlantKind::cstr) {
    warnings_.push_back(
        "reactor scenario runs without constraint tightening; no constraint guarantees");
    if (cfg_.mode == ControllerMode::tube && !cfg_.cstr.adaptive_gains) {
      CstrPlanner probe(cfg_.cstr.model,
                        {cfg_.cstr.sample_time, cfg_.horizon, cfg_.Q, cfg_.R, cfg_.cstr.target,
                         cfg_.cstr.radii, cfg_.cstr.heat_limit, false});
      lqr_ = solve_dare(probe.solver().spec().plant, cfg_.Q, cfg_.R);
      K_plant_ = lqr_.K;
    } else {
      K_plant_ = Mat::Zero(1, 2);
    }
    return;
  }

  const LinearPlant& plant = cfg_.plant;
  lqr_ = solve_dare(plant, cfg_.Q, cfg_.R);
  const Mat& K = lqr_.K;
  const Mat Acl = plant.A + plant.B * K;

  OcpSpec spec;
  spec.plant = plant;
  spec.N = cfg_.horizon;
  spec.Q = cfg_.Q;
  spec.R = cfg_.R;
  spec.P = lqr_.P;
  if (cfg_.mode == ControllerMode::tube) {
    const HPolytope W = disturbance_set(cfg_.disturbance, plant.n());
    tube_ = build_tube(plant, K, W, cfg_.horizon, cfg_.tau_rtt, cfg_.n_loss, cfg_.tube_length);
    TightenedSets sets = tighten(cfg_.X, cfg_.U, cfg_.X, *tube_, K);
    sets.Xfbar = max_admissible_set(Acl, sets.Xbar, sets.Ubar, K);
    if (sets.Xfbar.is_empty()) throw TubeTooLarge("tube exceeds constraints: terminal set");
    sets_ = sets;
    spec.Xbar = sets.Xbar;
    spec.Ubar = sets.Ubar;
    spec.Xfbar = sets.Xfbar;
    K_plant_ = K;
  } else {
    spec.Xbar = cfg_.X;
    spec.Ubar = cfg_.U;
    spec.Xfbar = max_admissible_set(Acl, cfg_.X, cfg_.U, K);
    K_plant_ = Mat::Zero(plant.m(), plant.n());
  }
  solver_ = std::make_shared<const OcpSolver>(std::move(spec));
}

Step Scenario::length() const { return script_ ? script_->length : cfg_.length; }

std::shared_ptr<TrajectoryPlanner> Scenario::make_planner() const {
  if (cfg_.plant_kind == PlantKind::cstr) {
    const bool adaptive = cfg_.mode == ControllerMode::tube && cfg_.cstr.adaptive_gains;
    return std::make_shared<CstrPlanner>(
        cfg_.cstr.model, CstrPlanner::Settings{cfg_.cstr.sample_time, cfg_.horizon, cfg_.Q, cfg_.R,
                                               cfg_.cstr.target, cfg_.cstr.radii,
                                               cfg_.cstr.heat_limit, adaptive});
  }
  return std::make_shared<LinearTubePlanner>(solver_, lqr_.K);
}

Vec Scenario::plant_step(const Vec& x, const Vec& u, const Vec& w) const {
  if (cfg_.plant_kind == PlantKind::cstr) {
    return integrate_cstr(cfg_.cstr.model, x, u(0), w(0), cfg_.cstr.sample_time,
                          cfg_.cstr.substeps);
  }
  return step(cfg_.plant, x, u, w);
}

RunTrace Scenario::run(std::uint64_t seed) const {
  const RunSeeds seeds = derive_seeds(seed);
  const bool reactor = cfg_.plant_kind == PlantKind::cstr;
  const int n = static_cast<int>(cfg_.x0.size());

  std::shared_ptr<TrajectoryPlanner> planner = make_planner();
  Vec hold = cfg_.hold_input;
  if (reactor) {
    hold = Vec::Constant(1, cstr_operating_point(cfg_.cstr.model, cfg_.cstr.target(0)).heat);
  }
  PlantController plant(cfg_.horizon, K_plant_, hold, cfg_.faults);
  RemoteController remote(planner, K_plant_, hold, cfg_.tau_rtt, cfg_.n_loss, cfg_.faults);

  std::unique_ptr<Channel> backward;
  std::unique_ptr<Channel> forward;
  RunTrace tr;
  RunMeta& meta = tr.meta;
  if (script_) {
    backward = std::make_unique<ScriptedChannel>(script_->backward);
    forward = std::make_unique<ScriptedChannel>(script_->forward);
    meta.tau_sc = script_->tau_sc;
    meta.tau_ca = script_->tau_ca;
  } else if (cfg_.channel.perfect) {
    backward = std::make_unique<PerfectChannel>();
    forward = std::make_unique<PerfectChannel>();
    meta.tau_sc = 0;
    meta.tau_ca = 1;
  } else {
    backward = std::make_unique<StochasticChannel>(cfg_.channel.backward, seeds.backward);
    forward = std::make_unique<StochasticChannel>(cfg_.channel.forward, seeds.forward);
    meta.tau_sc = cfg_.channel.backward.tau_bar;
    meta.tau_ca = cfg_.channel.forward.tau_bar + 1;
  }
  const bool enforce = cfg_.channel.enforce_loss_bound && !script_ && !cfg_.channel.perfect;
  LoopLossGuard guard(cfg_.n_loss, enforce);

  std::optional<DisturbanceModel> disturbance;
  Rng reactor_rng(seeds.disturbance);
  if (!reactor) {
    const DisturbanceConfig& d = cfg_.disturbance;
    if (d.kind == "scalar") {
      disturbance = DisturbanceModel::scalar_channel(d.amplitude * d.direction, seeds.disturbance);
    } else if (d.kind == "uniform") {
      disturbance = DisturbanceModel::uniform(HPolytope::box(d.lower, d.upper), seeds.disturbance);
    } else {
      disturbance = DisturbanceModel::zero(n);
    }
  }

  meta.scenario = cfg_.name;
  meta.mode = to_string(cfg_.mode);
  meta.seed = seed;
  meta.N = cfg_.horizon;
  meta.tau_rtt = cfg_.tau_rtt;
  meta.n_loss = cfg_.n_loss;
  meta.n = n;
  meta.m = static_cast<int>(hold.size());
  meta.enforce_loss_bound = enforce;
  meta.scripted = script_.has_value();
  meta.length = length();

  EventQueue queue;
  Vec x = cfg_.x0;

  auto send_control = [&](Step t, const RemoteOutput& out, std::optional<Step> source) {
    if (out.skipped) {
      PacketEventRecord rec;
      rec.t = t;
      rec.dir = Direction::control;
      rec.kind = PacketEventKind::skipped;
      rec.t_p = source.value_or(-1);
      tr.packets.push_back(rec);
      if (source) guard.on_no_response(*source);
      return;
    }
    if (!out.packet) return;
    tr.predictions.push_back(*out.record);
    tr.issued.push_back(out.packet);
    Verdict v = forward->transmit(t);
    if (!v.dropped) v.delivered_at += 1;
    if (source) v = guard.on_response(*source, t + 1, v, forward->fallback_delay());
    PacketEventRecord rec;
    rec.t = t;
    rec.dir = Direction::control;
    rec.kind = v.dropped ? PacketEventKind::dropped : PacketEventKind::sent;
    rec.id = out.packet->id;
    rec.t_p = out.packet->source_time;
    rec.t_pd = out.packet->t_pd;
    rec.delivered_at = v.dropped ? 0 : v.delivered_at;
    rec.forced = v.forced;
    rec.late = v.late;
    tr.packets.push_back(rec);
    if (!v.dropped) queue.push(v.delivered_at, Direction::control, out.packet);
  };

  const Step end = length();
  for (Step t = 0; t < end; ++t) {
    std::vector<PacketPtr> incoming;
    for (Payload& p : queue.pop_due(t, Direction::control)) {
      PacketPtr pkt = std::get<PacketPtr>(std::move(p));
      PacketEventRecord rec;
      rec.t = t;
      rec.dir = Direction::control;
      rec.kind = PacketEventKind::delivered;
      rec.id = pkt->id;
      rec.t_p = pkt->source_time;
      rec.t_pd = pkt->t_pd;
      tr.packets.push_back(rec);
      incoming.push_back(std::move(pkt));
    }

    PlantTickResult r;
    try {
      r = plant.tick(t, incoming, x);
    } catch (const HorizonExhausted& e) {
      tr.hard_failure = e.what();
      tr.failure_time = e.time();
      break;
    }
    for (const PlantEvent& ev : r.events) {
      if (ev.kind == PlantEventKind::reused) continue;
      PacketEventRecord rec;
      rec.t = t;
      rec.dir = Direction::control;
      rec.kind = plant_event_kind(ev.kind);
      rec.id = ev.id;
      rec.t_pd = ev.t_pd;
      tr.packets.push_back(rec);
    }

    StepRecord step_rec;
    step_rec.t = t;
    step_rec.x = x;
    step_rec.u = r.u;
    step_rec.v_star = r.v_star;
    step_rec.x_hat = r.x_hat;
    step_rec.active_id = r.active_id;
    step_rec.index = r.index;
    step_rec.hold = r.hold;

    {
      Verdict v = backward->transmit(t);
      v = guard.on_measurement(t, v, backward->fallback_delay());
      PacketEventRecord rec;
      rec.t = t;
      rec.dir = Direction::measurement;
      rec.kind = v.dropped ? PacketEventKind::dropped : PacketEventKind::sent;
      rec.t_p = t;
      rec.delivered_at = v.dropped ? 0 : v.delivered_at;
      rec.forced = v.forced;
      rec.late = v.late;
      tr.packets.push_back(rec);
      if (!v.dropped) queue.push(v.delivered_at, Direction::measurement, r.outgoing);
    }

    // The reactor planner integrates the nonlinear model; a prediction that
    // runs away thermally ends the run like a plant failure. So does a plant
    // report the remote cannot explain.
    try {
      std::vector<MeasurementPacket> arrivals;
      for (Payload& p : queue.pop_due(t, Direction::measurement)) {
        arrivals.push_back(std::get<MeasurementPacket>(std::move(p)));
      }
      std::stable_sort(arrivals.begin(), arrivals.end(),
                       [](const MeasurementPacket& a, const MeasurementPacket& b) {
                         return a.t_p < b.t_p;
                       });
      bool processed = false;
      for (const MeasurementPacket& mp : arrivals) {
        PacketEventRecord rec;
        rec.t = t;
        rec.dir = Direction::measurement;
        rec.kind = PacketEventKind::delivered;
        rec.t_p = mp.t_p;
        tr.packets.push_back(rec);
        RemoteOutput out = remote.on_measurement(t, mp);
        if (out.discarded) {
          rec.kind = PacketEventKind::discarded;
          tr.packets.push_back(rec);
          continue;
        }
        processed = true;
        guard.on_processed(mp.t_p);
        send_control(t, out, mp.t_p);
      }
      if (!processed) send_control(t, remote.on_silence(t), std::nullopt);
    } catch (const std::domain_error& e) {
      tr.steps.push_back(std::move(step_rec));
      tr.hard_failure = std::string("remote prediction left the model domain: ") + e.what();
      tr.failure_time = t;
      break;
    } catch (const ProtocolError& e) {
      // Violated channel assumptions surface here; stop rather than repair.
      tr.steps.push_back(std::move(step_rec));
      tr.hard_failure = std::string("protocol corruption: ") + e.what();
      tr.failure_time = t;
      break;
    }

    step_rec.mode = remote.mode();
    tr.steps.push_back(std::move(step_rec));

    Vec w;
    if (reactor) {
      const double a = cfg_.cstr.concentration_disturbance;
      w = Vec::Constant(1, uniform(reactor_rng, -a, a));
    } else {
      w = disturbance->sample();
    }
    try {
      x = plant_step(x, r.u, w);
    } catch (const std::domain_error& e) {
      tr.hard_failure = std::string("plant left its physical domain: ") + e.what();
      tr.failure_time = t;
      break;
    }
  }
  return tr;
}

AuditReport Scenario::audit(const RunTrace& trace) const {
  if (tube_) return ncsmpc::audit(trace, &tube_->S, &cfg_.X, &cfg_.U);
  return ncsmpc::audit(trace);
}

RunSummary Scenario::summarize(const RunTrace& trace, const AuditReport& report) const {
  RunSummary s;
  s.scenario = trace.meta.scenario;
  s.mode = trace.meta.mode;
  s.seed = trace.meta.seed;
  s.steps = static_cast<Step>(trace.steps.size());
  s.hard_failure = trace.hard_failure.has_value();
  s.failure = trace.hard_failure.value_or("");
  for (const StepRecord& r : trace.steps) {
    const double ex = excess(cfg_.X, r.x);
    const double eu = excess(cfg_.U, r.u);
    if (ex > 1e-9) ++s.state_violations;
    if (eu > 1e-9) ++s.input_violations;
    s.max_state_excess = std::max(s.max_state_excess, ex);
    s.max_input_excess = std::max(s.max_input_excess, eu);
  }
  s.recovery_episodes = static_cast<int>(report.latency.episodes.size());
  s.max_recovery_latency = report.latency.max_latency;
  s.max_consecutive_losses = report.max_consecutive_losses;
  for (const PredictionRecord& p : trace.predictions) {
    ++s.predictions;
    if (p.status != QpStatus::optimal) ++s.infeasible_plans;
    if (p.fallback) ++s.fallback_plans;
  }
  for (const PacketEventRecord& p : trace.packets) {
    if (p.kind == PacketEventKind::dropped) ++s.packets_dropped;
    if (p.forced && p.kind == PacketEventKind::sent) ++s.forced_deliveries;
  }
  s.loss_bound_respected = s.max_consecutive_losses <= trace.meta.n_loss;
  if (!trace.steps.empty()) {
    s.final_state = trace.steps.back().x;
    if (cfg_.plant_kind == PlantKind::cstr) {
      const Vec d = (s.final_state - cfg_.cstr.target).cwiseQuotient(cfg_.cstr.radii);
      s.terminal_value = d.squaredNorm();
      s.in_terminal_set = *s.terminal_value <= 1.0;
      s.final_error = (s.final_state - cfg_.cstr.target).norm();
    } else {
      s.final_error = s.final_state.norm();
    }
  }
  return s;
}

}  // namespace ncsmpc
