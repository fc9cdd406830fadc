#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace ncsmpc {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Plant-clock step index. All protocol times are integer multiples of the
/// sample time.
using Step = std::int64_t;

/// Trajectory identifier. 0 is reserved for the initial hold trajectory.
using TrajectoryId = std::uint64_t;

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : std::runtime_error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

inline void require_dims(bool ok, const char* what) {
  if (!ok) throw DimensionError(what);
}

}  // namespace ncsmpc
