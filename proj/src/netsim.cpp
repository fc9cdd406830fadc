#include "ncsmpc/netsim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace ncsmpc {

double WeibullParams::mean() const { return scale * std::tgamma(1.0 + 1.0 / shape); }

double WeibullParams::variance() const {
  const double g1 = std::tgamma(1.0 + 1.0 / shape);
  const double g2 = std::tgamma(1.0 + 2.0 / shape);
  return scale * scale * (g2 - g1 * g1);
}

double sample_weibull(Rng& rng, const WeibullParams& p) {
  const double u = uniform01(rng);
  return p.scale * std::pow(-std::log1p(-u), 1.0 / p.shape);
}

MarkovChain::MarkovChain(Mat transition, int initial_state)
    : P_(std::move(transition)), state_(initial_state) {
  require_dims(P_.rows() == P_.cols() && P_.rows() >= 1, "markov chain: square matrix required");
  require_dims(initial_state >= 0 && initial_state < P_.rows(), "markov chain: bad initial state");
  for (Eigen::Index i = 0; i < P_.rows(); ++i) {
    if ((P_.row(i).array() < 0.0).any() || std::abs(P_.row(i).sum() - 1.0) > 1e-12) {
      throw std::invalid_argument("markov chain: rows must be probability vectors");
    }
  }
}

int MarkovChain::advance(Rng& rng) {
  const double u = uniform01(rng);
  double acc = 0.0;
  const auto n = P_.cols();
  for (Eigen::Index j = 0; j < n; ++j) {
    acc += P_(state_, j);
    if (u < acc) {
      state_ = static_cast<int>(j);
      return state_;
    }
  }
  // Rounding left a sliver above the last cumulative sum.
  for (Eigen::Index j = n - 1; j >= 0; --j) {
    if (P_(state_, j) > 0.0) {
      state_ = static_cast<int>(j);
      break;
    }
  }
  return state_;
}

ChannelParams ChannelParams::defaults(int tau_bar) {
  ChannelParams p;
  p.load_transition.resize(3, 3);
  p.load_transition << 0.90, 0.08, 0.02,
                       0.10, 0.80, 0.10,
                       0.05, 0.15, 0.80;
  p.weibull = {WeibullParams{1.5, 1.0}, WeibullParams{1.5, 2.5}, WeibullParams{1.5, 5.0}};
  p.drop_transition.resize(2, 2);
  p.drop_transition << 0.95, 0.05,
                       0.60, 0.40;
  p.tau_bar = tau_bar;
  return p;
}

void ChannelParams::validate() const {
  MarkovChain(load_transition, 0);
  MarkovChain(drop_transition, 0);
  require_dims(load_transition.rows() == 3, "channel: load chain must have 3 states");
  require_dims(drop_transition.rows() == 2, "channel: drop chain must have 2 states");
  for (const WeibullParams& w : weibull) {
    if (!(w.shape > 0.0) || !(w.scale > 0.0)) {
      throw std::invalid_argument("channel: Weibull shape and scale must be positive");
    }
  }
  if (tau_bar < 0) throw std::invalid_argument("channel: delay bound must be nonnegative");
}

StochasticChannel::StochasticChannel(ChannelParams params, std::uint64_t seed)
    : params_(std::move(params)), rng_(seed) {
  params_.validate();
  load_ = MarkovChain(params_.load_transition, 0);
  drop_ = MarkovChain(params_.drop_transition, 0);
}

Verdict StochasticChannel::transmit(Step now) {
  const int drop_state = drop_.advance(rng_);
  const int load_state = load_.advance(rng_);
  const double raw = sample_weibull(rng_, params_.weibull[load_state]);
  const double capped = std::min(raw, 1e6);
  const int delay = static_cast<int>(std::ceil(capped));
  last_clamped_ = std::min(delay, params_.tau_bar);

  Verdict v;
  v.delay = delay;
  if (drop_state == 1) {
    v.dropped = true;
  } else if (delay > params_.tau_bar) {
    v.late = true;
    if (params_.deliver_late) {
      v.delivered_at = now + delay;
    } else {
      v.dropped = true;
    }
  } else {
    v.delivered_at = now + delay;
  }
  return v;
}

ScriptedChannel::ScriptedChannel(std::map<Step, ScriptVerdict> verdicts, int bound)
    : verdicts_(std::move(verdicts)), bound_(bound) {}

ScriptedChannel ScriptedChannel::from_sequence(const std::vector<ScriptVerdict>& seq, int bound) {
  std::map<Step, ScriptVerdict> m;
  for (std::size_t i = 0; i < seq.size(); ++i) m[static_cast<Step>(i)] = seq[i];
  return ScriptedChannel(std::move(m), bound);
}

Verdict ScriptedChannel::transmit(Step now) {
  auto it = verdicts_.find(now);
  if (it == verdicts_.end()) {
    throw std::out_of_range("scripted channel exhausted at t=" + std::to_string(now));
  }
  Verdict v;
  v.delay = it->second.delay;
  if (it->second.drop) {
    v.dropped = true;
  } else {
    v.delivered_at = now + it->second.delay;
  }
  return v;
}

void EventQueue::push(Step at, Direction dir, Payload payload) {
  events_.emplace(std::make_tuple(at, static_cast<int>(dir), seq_++), std::move(payload));
}

std::vector<Payload> EventQueue::pop_due(Step now, Direction dir) {
  std::vector<Payload> out;
  for (auto it = events_.begin(); it != events_.end() && std::get<0>(it->first) <= now;) {
    if (std::get<1>(it->first) == static_cast<int>(dir)) {
      out.push_back(std::move(it->second));
      it = events_.erase(it);
    } else {
      ++it;
    }
  }
  return out;
}

std::optional<Step> EventQueue::next_time() const {
  if (events_.empty()) return std::nullopt;
  return std::get<0>(events_.begin()->first);
}

LoopLossGuard::LoopLossGuard(int n_loss, bool enforce) : n_loss_(n_loss), enforce_(enforce) {}

int LoopLossGuard::run_if_lost(Step t) const {
  int run = 1;
  for (Step s = t - 1;; --s) {
    auto it = state_.find(s);
    if (it == state_.end() || it->second != State::lost) break;
    ++run;
  }
  for (Step s = t + 1;; ++s) {
    auto it = state_.find(s);
    if (it == state_.end() || it->second != State::lost) break;
    ++run;
  }
  return run;
}

void LoopLossGuard::mark_lost(Step t) {
  const int run = run_if_lost(t);
  state_[t] = State::lost;
  arrival_.erase(t);
  if (run > n_loss_) ++violations_;
  max_run_ = std::max(max_run_, run);
}

Verdict LoopLossGuard::on_measurement(Step t, Verdict v, int fallback_delay) {
  if (v.dropped) {
    if (enforce_ && run_if_lost(t) > n_loss_) {
      v.dropped = false;
      v.late = false;
      v.forced = true;
      v.delay = fallback_delay;
      v.delivered_at = t + fallback_delay;
      ++forced_;
    } else {
      mark_lost(t);
      return v;
    }
  }

  // Earlier measurements still in flight that this one would overtake are
  // discarded by the remote on arrival.
  std::vector<Step> victims;
  Step latest = v.delivered_at;
  for (const auto& [s, at] : arrival_) {
    if (s < t && at > v.delivered_at) {
      victims.push_back(s);
      latest = std::max(latest, at);
    }
  }
  if (!victims.empty()) {
    bool too_long = false;
    if (enforce_) {
      std::map<Step, State> saved = state_;
      for (Step s : victims) state_[s] = State::lost;
      for (Step s : victims) {
        state_[s] = State::in_flight;
        too_long = too_long || run_if_lost(s) > n_loss_;
        state_[s] = State::lost;
      }
      state_ = std::move(saved);
    }
    if (too_long) {
      v.delivered_at = latest;
      v.delay = static_cast<int>(latest - t);
      v.forced = true;
      ++forced_;
    } else {
      for (Step s : victims) mark_lost(s);
    }
  }
  state_[t] = State::in_flight;
  arrival_[t] = v.delivered_at;
  return v;
}

void LoopLossGuard::on_processed(Step t) {
  arrival_.erase(t);
  auto it = state_.find(t);
  if (it != state_.end() && it->second == State::in_flight) it->second = State::processed;
}

Verdict LoopLossGuard::on_response(Step t, Step now, Verdict v, int fallback_delay) {
  if (v.dropped) {
    if (enforce_ && run_if_lost(t) > n_loss_) {
      v.dropped = false;
      v.late = false;
      v.forced = true;
      v.delay = fallback_delay;
      v.delivered_at = now + fallback_delay;
      ++forced_;
      state_[t] = State::ok;
    } else {
      mark_lost(t);
    }
    return v;
  }
  state_[t] = State::ok;
  return v;
}

void LoopLossGuard::on_no_response(Step t) { mark_lost(t); }

int longest_loss_run(const std::vector<bool>& lost) {
  int best = 0;
  int run = 0;
  for (bool l : lost) {
    run = l ? run + 1 : 0;
    best = std::max(best, run);
  }
  return best;
}

WorstCaseScript build_worst_case_script(int tau_rtt, int n_loss, int tail) {
  if (tau_rtt < 1 || n_loss < 0) {
    throw std::invalid_argument("worst-case script: tau_rtt >= 1 and n_loss >= 0 required");
  }
  WorstCaseScript w;
  w.tau_rtt = tau_rtt;
  w.n_loss = n_loss;
  w.tau_sc = tau_rtt - 1;
  w.tau_ca = 1;
  const Step a = 3 * tau_rtt + 2;
  w.first_drop = a;
  w.correction_time = a + tau_rtt + n_loss - 1;
  const Step t_cor = w.correction_time;
  w.length = t_cor + 2 * tau_rtt + n_loss + tail;
  w.window = n_loss == 0 ? tau_rtt + 1 : 3 * tau_rtt + 2 * n_loss - 1;

  std::map<Step, ScriptVerdict> fwd;
  std::map<Step, ScriptVerdict> bwd;
  for (Step t = 0; t < w.length; ++t) {
    fwd[t] = ScriptVerdict{false, 0};
    bwd[t] = ScriptVerdict{false, 0};
  }
  if (n_loss > 0) {
    // First episode: nominal packet for t = a lost, detection response and
    // the silence corrections lost, measurements after detection lost.
    fwd[a - tau_rtt].drop = true;
    for (Step t = a; t <= a + n_loss - 2; ++t) fwd[t].drop = true;
    const Step last_silent = tau_rtt == 1 ? a + n_loss - 2 : a + n_loss - 1;
    for (Step t = a + 1; t <= last_silent; ++t) bwd[t].drop = true;

    // Second episode: the first nominal packet after the acknowledgement is
    // lost, the measurements that would reveal it are lost, and the next
    // ones arrive together as late as allowed.
    fwd[t_cor].drop = true;
    const int hidden = tau_rtt == 1 ? n_loss - 1 : n_loss;
    for (Step t = t_cor + tau_rtt; t < t_cor + tau_rtt + hidden; ++t) bwd[t].drop = true;
    const Step burst_end = t_cor + 2 * tau_rtt + n_loss - 1;
    for (Step t = t_cor + tau_rtt + hidden; t <= burst_end; ++t) {
      bwd[t].delay = static_cast<int>(burst_end - t);
    }
  }
  w.forward = ScriptedChannel(std::move(fwd), 0);
  w.backward = ScriptedChannel(std::move(bwd), w.tau_sc);
  return w;
}

}  // namespace ncsmpc
