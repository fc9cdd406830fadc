#include "ncsmpc/linear_system.hpp"

#include <cmath>
#include <utility>

#include <Eigen/Eigenvalues>

namespace ncsmpc {

LinearPlant::LinearPlant(Mat a, Mat b, double ts)
    : A(std::move(a)), B(std::move(b)), sample_time(ts) {
  require_dims(A.rows() >= 1 && A.rows() == A.cols(), "A must be square n x n");
  require_dims(B.rows() == A.rows() && B.cols() >= 1, "B must be n x m");
  require_dims(A.allFinite() && B.allFinite(), "plant matrices must be finite");
}

Vec step(const LinearPlant& plant, const Vec& x, const Vec& u, const Vec& w) {
  require_dims(x.size() == plant.n(), "step: state dimension mismatch");
  require_dims(u.size() == plant.m(), "step: input dimension mismatch");
  require_dims(w.size() == plant.n(), "step: disturbance dimension mismatch");
  return plant.A * x + plant.B * u + w;
}

Vec step_nominal(const LinearPlant& plant, const Vec& z, const Vec& v) {
  require_dims(z.size() == plant.n(), "step_nominal: state dimension mismatch");
  require_dims(v.size() == plant.m(), "step_nominal: input dimension mismatch");
  return plant.A * z + plant.B * v;
}

std::vector<Vec> rollout(const LinearPlant& plant, const Vec& x0,
                         const std::vector<Vec>& inputs,
                         const std::vector<Vec>& disturbances) {
  require_dims(inputs.size() == disturbances.size(),
               "rollout: input and disturbance sequences differ in length");
  require_dims(x0.size() == plant.n(), "rollout: state dimension mismatch");
  std::vector<Vec> states;
  states.reserve(inputs.size() + 1);
  states.push_back(x0);
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    states.push_back(step(plant, states.back(), inputs[k], disturbances[k]));
  }
  return states;
}

namespace {

Mat riccati_map(const LinearPlant& plant, const Mat& Q, const Mat& R,
                const Mat& P) {
  const Mat& A = plant.A;
  const Mat& B = plant.B;
  const Mat BtPA = B.transpose() * P * A;
  const Mat S = R + B.transpose() * P * B;
  Mat next = Q + A.transpose() * P * A - BtPA.transpose() * S.ldlt().solve(BtPA);
  return 0.5 * (next + next.transpose());
}

}  // namespace

double dare_residual(const LinearPlant& plant, const Mat& Q, const Mat& R,
                     const Mat& P) {
  return (riccati_map(plant, Q, R, P) - P).norm();
}

LqrSolution solve_dare(const LinearPlant& plant, const Mat& Q, const Mat& R,
                       int max_iterations) {
  const int n = plant.n();
  const int m = plant.m();
  require_dims(Q.rows() == n && Q.cols() == n, "solve_dare: Q must be n x n");
  require_dims(R.rows() == m && R.cols() == m, "solve_dare: R must be m x m");
  if (!Q.isApprox(Q.transpose(), 1e-12) && (Q - Q.transpose()).norm() > 1e-12) {
    throw std::invalid_argument("solve_dare: Q must be symmetric");
  }
  Eigen::LLT<Mat> r_chol(R);
  if (r_chol.info() != Eigen::Success) {
    throw std::invalid_argument("solve_dare: R must be positive definite");
  }

  Mat P = 0.5 * (Q + Q.transpose());
  double residual = 0.0;
  int it = 0;
  for (; it < max_iterations; ++it) {
    Mat next = riccati_map(plant, Q, R, P);
    residual = (next - P).norm();
    P = std::move(next);
    if (residual <= 1e-8 * (1.0 + P.norm())) {
      // Residual of the accepted iterate, not of its predecessor.
      residual = dare_residual(plant, Q, R, P);
      if (residual <= 1e-8 * (1.0 + P.norm())) break;
    }
  }
  if (it == max_iterations) {
    throw ConvergenceError("solve_dare: Riccati recursion did not converge",
                           residual);
  }
  // Polish: slow closed loops leave the gain visibly off at the acceptance
  // tolerance, so keep iterating while the residual still shrinks.
  for (int extra = 0; extra < max_iterations && residual > 1e-14 * (1.0 + P.norm()); ++extra) {
    Mat next = riccati_map(plant, Q, R, P);
    const double r = dare_residual(plant, Q, R, next);
    if (!(r < residual)) break;
    P = std::move(next);
    residual = r;
    ++it;
  }

  const Mat& A = plant.A;
  const Mat& B = plant.B;
  const Mat S = R + B.transpose() * P * B;
  LqrSolution out;
  out.K = -S.ldlt().solve(B.transpose() * P * A);
  out.P = std::move(P);
  out.iterations = it + 1;
  out.residual = residual;
  return out;
}

double spectral_radius(const Mat& M) {
  require_dims(M.rows() == M.cols(), "spectral_radius: matrix must be square");
  if (M.size() == 0) return 0.0;
  Eigen::EigenSolver<Mat> es(M, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace ncsmpc
