#pragma once

#include <cstdint>
#include <vector>

#include "ncsmpc/polytope.hpp"
#include "ncsmpc/random.hpp"

namespace ncsmpc {

/// Generator of additive disturbances w[k] in W. One instance per run.
class DisturbanceModel {
 public:
  enum class Kind { zero, uniform, scripted, scalar_channel };

  static DisturbanceModel zero(int n);
  /// Rejection sampling from W's bounding box (W needs an interior).
  static DisturbanceModel uniform(HPolytope W, std::uint64_t seed);
  static DisturbanceModel scripted(HPolytope W, std::vector<Vec> sequence);
  /// w = direction * d with d uniform in [-1, 1].
  static DisturbanceModel scalar_channel(const Vec& direction, std::uint64_t seed);

  Vec sample();

  Kind kind() const { return kind_; }
  const HPolytope& set() const { return W_; }
  int dim() const { return W_.dim(); }

 private:
  Kind kind_ = Kind::zero;
  HPolytope W_;
  Rng rng_;
  Vec lo_, hi_;
  Vec direction_;
  std::vector<Vec> script_;
  std::size_t cursor_ = 0;
};

}  // namespace ncsmpc
