#include "ncsmpc/disturbance.hpp"

#include <stdexcept>
#include <utility>

namespace ncsmpc {

DisturbanceModel DisturbanceModel::zero(int n) {
  DisturbanceModel d;
  d.kind_ = Kind::zero;
  d.W_ = HPolytope::point(Vec::Zero(n));
  return d;
}

DisturbanceModel DisturbanceModel::uniform(HPolytope W, std::uint64_t seed) {
  DisturbanceModel d;
  d.kind_ = Kind::uniform;
  const int n = W.dim();
  d.lo_.resize(n);
  d.hi_.resize(n);
  for (int i = 0; i < n; ++i) {
    d.hi_(i) = support(W, Vec::Unit(n, i));
    d.lo_(i) = -support(W, -Vec::Unit(n, i));
  }
  d.W_ = std::move(W);
  d.rng_.seed(seed);
  return d;
}

DisturbanceModel DisturbanceModel::scripted(HPolytope W, std::vector<Vec> sequence) {
  for (const Vec& w : sequence) {
    require_dims(w.size() == W.dim(), "scripted disturbance: dimension mismatch");
    if (!contains(W, w)) {
      throw std::invalid_argument("scripted disturbance: sample outside W");
    }
  }
  DisturbanceModel d;
  d.kind_ = Kind::scripted;
  d.W_ = std::move(W);
  d.script_ = std::move(sequence);
  return d;
}

DisturbanceModel DisturbanceModel::scalar_channel(const Vec& direction, std::uint64_t seed) {
  DisturbanceModel d;
  d.kind_ = Kind::scalar_channel;
  d.W_ = HPolytope::segment(direction);
  d.direction_ = direction;
  d.rng_.seed(seed);
  return d;
}

Vec DisturbanceModel::sample() {
  switch (kind_) {
    case Kind::zero:
      return Vec::Zero(W_.dim());
    case Kind::scalar_channel:
      return direction_ * ncsmpc::uniform(rng_, -1.0, 1.0);
    case Kind::scripted:
      if (cursor_ >= script_.size()) {
        throw std::out_of_range("scripted disturbance exhausted");
      }
      return script_[cursor_++];
    case Kind::uniform: {
      Vec w(W_.dim());
      for (int attempt = 0; attempt < 10000; ++attempt) {
        for (int i = 0; i < w.size(); ++i) w(i) = ncsmpc::uniform(rng_, lo_(i), hi_(i));
        if (contains(W_, w, 0.0)) return w;
      }
      throw std::runtime_error("uniform disturbance: rejection sampling failed");
    }
  }
  return Vec::Zero(W_.dim());
}

}  // namespace ncsmpc
