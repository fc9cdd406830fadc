#pragma once

#include <cmath>
#include <cstddef>

#include "ncsmpc/config.hpp"
#include "ncsmpc/linear_system.hpp"
#include "ncsmpc/types.hpp"

namespace testutil {

inline ncsmpc::Vec vec(std::initializer_list<double> v) {
  ncsmpc::Vec out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

template <std::size_t N>
ncsmpc::Vec vec(const double (&a)[N]) {
  ncsmpc::Vec out(static_cast<Eigen::Index>(N));
  for (std::size_t i = 0; i < N; ++i) out(static_cast<Eigen::Index>(i)) = a[i];
  return out;
}

inline double rel_err(double got, double want) {
  return std::abs(got - want) / std::max(1.0, std::abs(want));
}

inline ncsmpc::LinearPlant cartpole_plant() {
  ncsmpc::Mat A(4, 4);
  A << 1, 0.002, 0.010, 0,
       0, 1.003, 0, 0.010,
       0, 0.437, 0.963, 0.0353,
       0, 0.551, 0.019, 0.981;
  ncsmpc::Mat B(4, 1);
  B << 0, 0, 0.048, 0.032;
  return ncsmpc::LinearPlant(A, B, 0.01);
}

inline ncsmpc::ScenarioConfig config(const char* name) {
  return ncsmpc::load_config(std::string(NCSMPC_CONFIG_DIR) + "/" + name);
}

}  // namespace testutil
