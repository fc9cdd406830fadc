#pragma once

#include <vector>

#include "ncsmpc/types.hpp"

namespace ncsmpc {

/// Discrete-time LTI plant x[k+1] = A x[k] + B u[k] + w[k].
struct LinearPlant {
  Mat A;
  Mat B;
  double sample_time = 1.0;

  LinearPlant() = default;
  LinearPlant(Mat a, Mat b, double ts = 1.0);

  int n() const { return static_cast<int>(A.rows()); }
  int m() const { return static_cast<int>(B.cols()); }
};

/// Tube feedback gain and terminal weight. Sign convention: the closed loop
/// is A + B K, i.e. K = -(R + B'PB)^{-1} B'PA.
struct LqrSolution {
  Mat K;
  Mat P;
  int iterations = 0;
  double residual = 0.0;
};

Vec step(const LinearPlant& plant, const Vec& x, const Vec& u, const Vec& w);
Vec step_nominal(const LinearPlant& plant, const Vec& z, const Vec& v);

/// States x0, x1, ..., x_len for equal-length input/disturbance sequences.
std::vector<Vec> rollout(const LinearPlant& plant, const Vec& x0,
                         const std::vector<Vec>& inputs,
                         const std::vector<Vec>& disturbances);

/// Frobenius norm of the DARE residual for a candidate P.
double dare_residual(const LinearPlant& plant, const Mat& Q, const Mat& R,
                     const Mat& P);

/// Riccati recursion P <- Q + A'PA - A'PB (R + B'PB)^{-1} B'PA iterated to a
/// fixed point. Throws ConvergenceError (carrying the last residual) when the
/// residual is not below 1e-8 (1 + |P|) after `max_iterations`.
LqrSolution solve_dare(const LinearPlant& plant, const Mat& Q, const Mat& R,
                       int max_iterations = 10000);

double spectral_radius(const Mat& M);

}  // namespace ncsmpc
