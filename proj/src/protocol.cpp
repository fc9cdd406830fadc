#include "ncsmpc/protocol.hpp"

#include <algorithm>
#include <sstream>

namespace ncsmpc {

PlantController::PlantController(int horizon, Mat K, Vec hold_input, ProtocolFaults faults)
    : N_(horizon), K_(std::move(K)), hold_(std::move(hold_input)), faults_(faults) {
  require_dims(N_ >= 1, "plant controller: horizon must be positive");
  require_dims(K_.rows() == hold_.size(), "plant controller: gain and hold input disagree");
}

PlantTickResult PlantController::tick(Step t, const std::vector<PacketPtr>& incoming,
                                      const Vec& x_measured) {
  PlantTickResult out;

  std::vector<PacketPtr> arrivals = incoming;
  std::sort(arrivals.begin(), arrivals.end(), [](const PacketPtr& a, const PacketPtr& b) {
    return std::pair(a->t_pd, a->id) < std::pair(b->t_pd, b->id);
  });
  for (const PacketPtr& p : arrivals) {
    if (p->t_pd < t && !faults_.accept_stale) {
      out.events.push_back({PlantEventKind::discarded_stale, p->id, p->t_pd});
      continue;
    }
    buffer_[{p->t_pd, p->id}] = p;
    out.events.push_back({PlantEventKind::buffered, p->id, p->t_pd});
  }

  bool applied = false;
  for (auto it = buffer_.begin(); it != buffer_.end() && it->first.first <= t;) {
    const PacketPtr p = it->second;
    if (p->t_pd < t && !faults_.accept_stale) {
      it = buffer_.erase(it);
      continue;
    }
    it = buffer_.erase(it);
    if (faults_.skip_consistency_check || p->i_c_last == i_p_last_) {
      active_ = p;
      applied_at_ = p->t_pd;
      i_p_last_ = p->id;
      applied = true;
      out.events.push_back({PlantEventKind::applied, p->id, p->t_pd});
      continue;
    }
    out.events.push_back({PlantEventKind::rejected, p->id, p->t_pd});
    for (auto later = buffer_.begin(); later != buffer_.end();) {
      if (later->second->i_c_last != i_p_last_) {
        out.events.push_back({PlantEventKind::rejected, later->second->id, later->second->t_pd});
        later = buffer_.erase(later);
      } else {
        ++later;
      }
    }
    it = buffer_.begin();
  }

  if (!active_) {
    out.hold = true;
    out.v_star = hold_;
    out.x_hat = x_measured;
    out.u = hold_;
  } else {
    int index = static_cast<int>(t - applied_at_);
    if (!applied && faults_.off_by_one_index) ++index;
    if (index > N_ - 1) {
      std::ostringstream msg;
      msg << "horizon exhausted at t=" << t << ": trajectory " << active_->id
          << " needs index " << index << " with N=" << N_;
      throw HorizonExhausted(msg.str(), t);
    }
    if (!applied) out.events.push_back({PlantEventKind::reused, active_->id, active_->t_pd});
    out.index = index;
    out.v_star = active_->V[index];
    out.x_hat = active_->X[index];
    const Mat& K = active_->gains.empty() ? K_ : active_->gains[index];
    out.u = tube_control(out.v_star, x_measured, out.x_hat, K);
  }
  out.active_id = i_p_last_;
  out.outgoing = MeasurementPacket{x_measured, t, i_p_last_};
  return out;
}

LinearTubePlanner::LinearTubePlanner(std::shared_ptr<const OcpSolver> solver, Mat K)
    : solver_(std::move(solver)), K_(std::move(K)) {}

Vec LinearTubePlanner::predict(const Vec& x, const Vec& u) const {
  return step_nominal(solver_->spec().plant, x, u);
}

Plan LinearTubePlanner::plan(const Vec& x0) {
  const OcpSolution sol = solver_->solve(x0);
  Plan out;
  out.status = sol.status;
  if (sol.status == QpStatus::optimal) {
    out.X = sol.Z;
    out.V = sol.V;
    last_V_ = sol.V;
    return out;
  }
  ++infeasible_;
  out.fallback = true;
  const int N = horizon();
  const LinearPlant& plant = solver_->spec().plant;
  out.X.push_back(x0);
  for (int j = 0; j < N; ++j) {
    Vec v;
    if (!last_V_.empty() && j + 1 < N) {
      v = last_V_[j + 1];
    } else {
      v = K_ * out.X.back();
    }
    out.V.push_back(v);
    out.X.push_back(step_nominal(plant, out.X.back(), v));
  }
  last_V_ = out.V;
  return out;
}

RemoteController::RemoteController(std::shared_ptr<TrajectoryPlanner> planner, Mat K,
                                   Vec hold_input, int tau_rtt, int n_loss,
                                   ProtocolFaults faults)
    : planner_(std::move(planner)),
      K_(std::move(K)),
      hold_(std::move(hold_input)),
      tau_rtt_(tau_rtt),
      n_loss_(n_loss),
      N_(planner_->horizon()),
      faults_(faults) {
  require_dims(tau_rtt_ >= 1, "remote controller: round-trip bound must be at least 1");
  auto hold = std::make_shared<ControlPacket>();
  hold->id = 0;
  hold->t_pd = kHoldStart;
  hold_packet_ = hold;
  buffer_[0] = Entry{hold_packet_, std::nullopt};
}

const RemoteController::Entry& RemoteController::entry(TrajectoryId id) const {
  auto it = buffer_.find(id);
  if (it == buffer_.end()) {
    throw ProtocolError("remote: trajectory " + std::to_string(id) +
                        " reported by the plant is not in the buffer");
  }
  return it->second;
}

Vec RemoteController::input_of(const ControlPacket& p, int index, const Vec& x_hat) const {
  if (p.id == 0) return hold_;
  const Mat& K = p.gains.empty() ? K_ : p.gains[index];
  return p.V[index] + K * (x_hat - p.X[index]);
}

std::vector<BufferEntryView> RemoteController::snapshot() const {
  std::vector<BufferEntryView> out;
  for (const auto& [id, e] : buffer_) {
    const bool pending = recovery_ && e.marker && *e.marker == pending_marker_;
    out.push_back({id, e.packet->t_pd, pending});
  }
  return out;
}

TrajectoryId RemoteController::active_at(Step s) const {
  TrajectoryId best = 0;
  Step best_t = kHoldStart - 1;
  bool found = false;
  for (const auto& [id, e] : buffer_) {
    const Step tp = e.packet->t_pd;
    if (tp <= s && (!found || tp > best_t || (tp == best_t && id > best))) {
      best = id;
      best_t = tp;
      found = true;
    }
  }
  if (!found) throw ProtocolError("remote: no trajectory covers the prediction window");
  return best;
}

RemoteOutput RemoteController::on_measurement(Step tick, const MeasurementPacket& mp) {
  if (newest_ && mp.t_p <= *newest_) {
    RemoteOutput out;
    out.discarded = true;
    return out;
  }
  newest_ = mp.t_p;
  last_ = mp;
  silent_ticks_ = 0;

  if (recovery_) {
    auto it = buffer_.find(mp.i_p_last);
    const bool ack = it != buffer_.end() && it->second.marker &&
                     *it->second.marker == pending_marker_;
    if (!ack) return predict_correction(tick, mp, mp.t_p + tau_rtt_, false);
    recovery_ = false;
    if (!faults_.skip_ack_prune) {
      for (auto e = buffer_.begin(); e != buffer_.end();) {
        if (e->second.marker && *e->second.marker == pending_marker_ && e->first != mp.i_p_last) {
          e = buffer_.erase(e);
        } else {
          ++e;
        }
      }
    }
    return predict_nominal(tick, mp);
  }

  const TrajectoryId expected = active_at(mp.t_p);
  if (expected == mp.i_p_last) {
    const Step since = entry(expected).packet->t_pd;
    for (auto e = buffer_.begin(); e != buffer_.end();) {
      if (e->second.packet->t_pd < since) {
        e = buffer_.erase(e);
      } else {
        ++e;
      }
    }
    return predict_nominal(tick, mp);
  }

  const Entry& confirmed = entry(mp.i_p_last);
  const Step confirmed_t = confirmed.packet->t_pd;
  recovery_ = true;
  pending_marker_ = mp.i_p_last;
  for (auto e = buffer_.begin(); e != buffer_.end();) {
    const Step tp = e->second.packet->t_pd;
    const bool future = tp > mp.t_p;
    const bool skipped_over = e->first != mp.i_p_last && tp >= confirmed_t && tp <= mp.t_p;
    if ((future && !faults_.skip_detection_prune) || skipped_over) {
      e = buffer_.erase(e);
    } else {
      ++e;
    }
  }
  return predict_correction(tick, mp, mp.t_p + tau_rtt_, false);
}

RemoteOutput RemoteController::on_silence(Step tick) {
  if (!last_) return {};
  ++silent_ticks_;
  if (!recovery_ || faults_.silent_in_recovery) return {};
  return predict_correction(tick, *last_, last_->t_p + tau_rtt_ + silent_ticks_, true);
}

RemoteOutput RemoteController::predict_nominal(Step tick, const MeasurementPacket& mp) {
  std::vector<ScheduleEntry> schedule;
  Vec x_hat = mp.x;
  for (Step s = mp.t_p; s < mp.t_p + tau_rtt_; ++s) {
    const TrajectoryId id = active_at(s);
    const ControlPacket& p = *entry(id).packet;
    const int index = id == 0 ? 0 : static_cast<int>(s - p.t_pd);
    if (id != 0 && index > N_ - 1) {
      RemoteOutput out;
      out.skipped = true;
      return out;
    }
    const Vec u = input_of(p, index, x_hat);
    schedule.push_back({s, id, index, id == 0 ? hold_ : p.V[index]});
    x_hat = planner_->predict(x_hat, u);
  }
  const Step t_pd = mp.t_p + tau_rtt_;
  return emit(tick, mp, t_pd, std::move(x_hat), std::move(schedule), active_at(t_pd - 1),
              false, false);
}

RemoteOutput RemoteController::predict_correction(Step tick, const MeasurementPacket& mp,
                                                  Step t_pd, bool from_silence) {
  const ControlPacket& base = *entry(mp.i_p_last).packet;
  std::vector<ScheduleEntry> schedule;
  Vec x_hat = mp.x;
  for (Step s = mp.t_p; s < t_pd; ++s) {
    const int index = base.id == 0 ? 0 : static_cast<int>(s - base.t_pd);
    if (base.id != 0 && index > N_ - 1) {
      RemoteOutput out;
      out.skipped = true;
      return out;
    }
    const Vec u = input_of(base, index, x_hat);
    schedule.push_back({s, base.id, index, base.id == 0 ? hold_ : base.V[index]});
    x_hat = planner_->predict(x_hat, u);
  }
  const TrajectoryId parent = faults_.wrong_correction_parent ? next_id_ - 1 : mp.i_p_last;
  return emit(tick, mp, t_pd, std::move(x_hat), std::move(schedule), parent, true,
              from_silence);
}

RemoteOutput RemoteController::emit(Step tick, const MeasurementPacket& mp, Step t_pd,
                                    Vec x_pred, std::vector<ScheduleEntry> schedule,
                                    TrajectoryId i_c_last, bool correction,
                                    bool from_silence) {
  PredictionRecord rec;
  rec.snapshot = snapshot();
  Plan plan = planner_->plan(x_pred);

  auto packet = std::make_shared<ControlPacket>();
  packet->id = (faults_.reuse_ids && correction && next_id_ > 1) ? next_id_ - 1 : next_id_++;
  packet->t_pd = t_pd;
  packet->X = std::move(plan.X);
  packet->V = std::move(plan.V);
  packet->gains = std::move(plan.gains);
  packet->i_c_last = i_c_last;
  if (correction) packet->err_marker = pending_marker_;
  packet->source_time = mp.t_p;
  buffer_[packet->id] = Entry{packet, packet->err_marker};

  rec.tick = tick;
  rec.source_time = mp.t_p;
  rec.id = packet->id;
  rec.t_pd = t_pd;
  rec.i_c_last = i_c_last;
  rec.correction = correction;
  rec.from_silence = from_silence;
  rec.err_marker = packet->err_marker;
  rec.mode = mode();
  rec.status = plan.status;
  rec.fallback = plan.fallback;
  rec.schedule = std::move(schedule);

  RemoteOutput out;
  out.packet = packet;
  out.record = std::move(rec);
  return out;
}

HorizonCheck validate_config(int horizon, int tau_rtt, int n_loss) {
  HorizonCheck c;
  if (horizon < 1 || tau_rtt < 1 || n_loss < 0) {
    c.message = "horizon and round-trip bound must be positive, loss bound nonnegative";
    return c;
  }
  c.required = n_loss + 2 * tau_rtt;
  c.recovery_bound = n_loss + tau_rtt;
  c.tube_length = 3 * tau_rtt + 2 * n_loss - 1;
  c.ok = horizon >= c.required;
  std::ostringstream msg;
  msg << "N=" << horizon << (c.ok ? " >= " : " < ") << c.required
      << " (n_loss + 2 tau_rtt); recovery bound M=" << c.recovery_bound
      << ", error-growth length " << c.tube_length;
  c.message = msg.str();
  return c;
}

}  // namespace ncsmpc
