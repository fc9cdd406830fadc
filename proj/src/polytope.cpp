#include "ncsmpc/polytope.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>

#include <Eigen/LU>
#include <Eigen/QR>

namespace ncsmpc {

HPolytope::HPolytope(Mat normals, Vec offsets)
    : H(std::move(normals)), h(std::move(offsets)) {
  require_dims(H.rows() == h.size(), "HPolytope: H and h row counts differ");
  require_dims(H.cols() >= 1, "HPolytope: dimension must be at least 1");
  for (Eigen::Index i = 0; i < H.rows(); ++i) {
    if (H.row(i).norm() == 0.0) {
      throw std::invalid_argument("HPolytope: zero normal row");
    }
  }
  require_dims(H.allFinite() && h.allFinite(), "HPolytope: entries must be finite");
}

HPolytope HPolytope::box(const Vec& lo, const Vec& hi) {
  require_dims(lo.size() == hi.size() && lo.size() >= 1, "box: bound sizes differ");
  const auto n = lo.size();
  Mat H(2 * n, n);
  H << Mat::Identity(n, n), -Mat::Identity(n, n);
  Vec h(2 * n);
  h << hi, -lo;
  return {H, h};
}

HPolytope HPolytope::symmetric_box(const Vec& half_widths) {
  return box(-half_widths, half_widths);
}

HPolytope HPolytope::point(const Vec& p) { return box(p, p); }

HPolytope HPolytope::segment(const Vec& g) {
  const auto n = g.size();
  const double len = g.norm();
  if (len == 0.0) return point(Vec::Zero(n));
  Eigen::HouseholderQR<Mat> qr(g);
  const Mat Qfull = qr.householderQ() * Mat::Identity(n, n);
  Mat H(2 * n, n);
  Vec h = Vec::Zero(2 * n);
  const Vec unit = g / len;
  H.row(0) = unit.transpose();
  H.row(1) = -unit.transpose();
  h(0) = len;
  h(1) = len;
  for (Eigen::Index j = 1; j < n; ++j) {
    H.row(2 * j) = Qfull.col(j).transpose();
    H.row(2 * j + 1) = -Qfull.col(j).transpose();
  }
  return {H, h};
}

double HPolytope::chebyshev_radius() const {
  // Dual of  max r  s.t.  H x + |H_i| r <= h,  r <= 1.
  const int k = rows();
  const int n = dim();
  Mat A = Mat::Zero(n + 1, k + 1);
  A.topLeftCorner(n, k) = H.transpose();
  A.block(n, 0, 1, k) = H.rowwise().norm().transpose();
  A(n, k) = 1.0;
  Vec b = Vec::Zero(n + 1);
  b(n) = 1.0;
  Vec c(k + 1);
  c << h, 1.0;
  const LpResult res = solve_standard_lp(A, b, c);
  if (res.status != LpStatus::optimal) return -std::numeric_limits<double>::infinity();
  return res.objective;
}

bool HPolytope::is_empty() const {
  const double scale = 1.0 + (h.size() > 0 ? h.cwiseAbs().maxCoeff() : 0.0);
  return chebyshev_radius() < -1e-9 * scale;
}

SupportResult try_support(const HPolytope& P, const Vec& a) {
  require_dims(a.size() == P.dim(), "support: direction dimension mismatch");
  // Dual:  min h'y  s.t.  H'y = a, y >= 0.
  const LpResult res = solve_standard_lp(P.H.transpose(), a, P.h);
  SupportResult out;
  switch (res.status) {
    case LpStatus::optimal:
      out.status = LpStatus::optimal;
      out.value = res.objective;
      break;
    case LpStatus::infeasible:
      out.status = P.is_empty() ? LpStatus::infeasible : LpStatus::unbounded;
      break;
    case LpStatus::unbounded:
      out.status = LpStatus::infeasible;
      break;
  }
  return out;
}

double support(const HPolytope& P, const Vec& a) {
  const SupportResult r = try_support(P, a);
  if (r.status == LpStatus::unbounded) {
    throw std::domain_error("support: polytope unbounded in the given direction");
  }
  if (r.status == LpStatus::infeasible) {
    throw std::domain_error("support: polytope is empty");
  }
  return r.value;
}

double support_image(const HPolytope& P, const Mat& K, const Vec& a) {
  return support(P, K.transpose() * a);
}

bool contains(const HPolytope& P, const Vec& x, double tol) {
  require_dims(x.size() == P.dim(), "contains: point dimension mismatch");
  return ((P.H * x - P.h).array() <= tol).all();
}

std::vector<Vec> vertices(const HPolytope& P) {
  const int n = P.dim();
  const int k = P.rows();
  std::vector<Vec> out;
  if (k < n) return out;
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;
  Mat Hs(n, n);
  Vec hs(n);
  while (true) {
    for (int i = 0; i < n; ++i) {
      Hs.row(i) = P.H.row(idx[i]);
      hs(i) = P.h(idx[i]);
    }
    Eigen::FullPivLU<Mat> lu(Hs);
    if (lu.rank() == n) {
      const Vec v = lu.solve(hs);
      const double scale = 1.0 + v.cwiseAbs().maxCoeff();
      if (contains(P, v, 1e-9 * scale)) {
        const bool dup = std::any_of(out.begin(), out.end(), [&](const Vec& u) {
          return (u - v).cwiseAbs().maxCoeff() <= 1e-9 * scale;
        });
        if (!dup) out.push_back(v);
      }
    }
    int pos = n - 1;
    while (pos >= 0 && idx[pos] == k - n + pos) --pos;
    if (pos < 0) break;
    ++idx[pos];
    for (int i = pos + 1; i < n; ++i) idx[i] = idx[i - 1] + 1;
  }
  return out;
}

HPolytope remove_redundant(const HPolytope& P, double tol) {
  const int n = P.dim();
  std::vector<Vec> normals;
  std::vector<double> offsets;
  for (int i = 0; i < P.rows(); ++i) {
    const double len = P.H.row(i).norm();
    const Vec d = P.H.row(i).transpose() / len;
    const double off = P.h(i) / len;
    bool merged = false;
    for (std::size_t j = 0; j < normals.size(); ++j) {
      if ((normals[j] - d).cwiseAbs().maxCoeff() <= 1e-12) {
        offsets[j] = std::min(offsets[j], off);
        merged = true;
        break;
      }
    }
    if (!merged) {
      normals.push_back(d);
      offsets.push_back(off);
    }
  }

  std::vector<bool> keep(normals.size(), true);
  for (std::size_t i = 0; i < normals.size(); ++i) {
    int others = 0;
    for (std::size_t j = 0; j < normals.size(); ++j) others += (j != i && keep[j]);
    if (others == 0) continue;
    Mat H(others, n);
    Vec h(others);
    int r = 0;
    for (std::size_t j = 0; j < normals.size(); ++j) {
      if (j == i || !keep[j]) continue;
      H.row(r) = normals[j].transpose();
      h(r) = offsets[j];
      ++r;
    }
    const SupportResult s = try_support(HPolytope(H, h), normals[i]);
    if (s.status == LpStatus::optimal &&
        s.value <= offsets[i] + tol * (1.0 + std::abs(offsets[i]))) {
      keep[i] = false;
    }
  }

  int count = static_cast<int>(std::count(keep.begin(), keep.end(), true));
  Mat H(count, n);
  Vec h(count);
  int r = 0;
  for (std::size_t i = 0; i < normals.size(); ++i) {
    if (!keep[i]) continue;
    H.row(r) = normals[i].transpose();
    h(r) = offsets[i];
    ++r;
  }
  return {H, h};
}

HPolytope minkowski_sum_image(const HPolytope& P, const Mat& M, const HPolytope& Q) {
  const int n = P.dim();
  require_dims(M.rows() == n && M.cols() == n, "minkowski_sum_image: M must be n x n");
  require_dims(Q.dim() == n, "minkowski_sum_image: dimension mismatch");
  if (P.is_empty() || Q.is_empty()) {
    throw std::invalid_argument("minkowski_sum_image: empty operand");
  }
  std::vector<Vec> mapped;
  for (const Vec& v : vertices(Q)) mapped.push_back(M * v);
  if (mapped.empty()) {
    throw std::invalid_argument("minkowski_sum_image: Q must be bounded");
  }

  std::vector<Vec> dirs;
  for (int i = 0; i < P.rows(); ++i) dirs.push_back(P.H.row(i).transpose());
  Eigen::FullPivLU<Mat> lu(M);
  if (lu.isInvertible()) {
    const Mat QHinv = Q.H * lu.inverse();
    for (int i = 0; i < Q.rows(); ++i) dirs.push_back(QHinv.row(i).transpose());
  }

  std::vector<Vec> normals;
  std::vector<double> offsets;
  for (const Vec& d : dirs) {
    const SupportResult sp = try_support(P, d);
    if (sp.status != LpStatus::optimal) continue;
    double sq = -std::numeric_limits<double>::infinity();
    for (const Vec& v : mapped) sq = std::max(sq, d.dot(v));
    normals.push_back(d);
    offsets.push_back(sp.value + sq);
  }
  Mat H(normals.size(), n);
  Vec h(normals.size());
  for (std::size_t i = 0; i < normals.size(); ++i) {
    H.row(i) = normals[i].transpose();
    h(i) = offsets[i];
  }
  return remove_redundant(HPolytope(H, h));
}

HPolytope pontryagin_diff(const HPolytope& P,
                          const std::function<double(const Vec&)>& support_s) {
  Vec h = P.h;
  for (int i = 0; i < P.rows(); ++i) h(i) -= support_s(P.H.row(i).transpose());
  return {P.H, h};
}

HPolytope pontryagin_diff(const HPolytope& P, const HPolytope& S) {
  require_dims(P.dim() == S.dim(), "pontryagin_diff: dimension mismatch");
  return pontryagin_diff(P, [&S](const Vec& a) { return support(S, a); });
}

double TubeSpec::support(const Vec& a) const {
  double total = 0.0;
  for (const Mat& V : mapped_w_vertices) total += (a.transpose() * V).maxCoeff();
  return total;
}

int tube_length(int horizon, int tau_rtt, int n_loss) {
  return std::max(horizon, 3 * tau_rtt + 2 * n_loss - 1);
}

TubeSpec build_tube(const LinearPlant& plant, const Mat& K, const HPolytope& W,
                    int horizon, int tau_rtt, int n_loss,
                    std::optional<int> length_override) {
  const int n = plant.n();
  require_dims(K.rows() == plant.m() && K.cols() == n, "build_tube: K must be m x n");
  require_dims(W.dim() == n, "build_tube: W dimension mismatch");
  const Mat Acl = plant.A + plant.B * K;
  if (spectral_radius(Acl) >= 1.0) {
    throw std::invalid_argument("build_tube: A+BK is not Schur stable");
  }
  if (!contains(W, Vec::Zero(n))) {
    throw std::invalid_argument("build_tube: W must contain the origin");
  }
  const std::vector<Vec> wv = vertices(W);
  if (wv.empty()) throw std::invalid_argument("build_tube: W must be bounded");
  Mat Wv(n, static_cast<Eigen::Index>(wv.size()));
  for (std::size_t i = 0; i < wv.size(); ++i) Wv.col(static_cast<Eigen::Index>(i)) = wv[i];

  TubeSpec tube;
  tube.L = length_override.value_or(tube_length(horizon, tau_rtt, n_loss));
  require_dims(tube.L >= 1, "build_tube: tube length must be positive");
  tube.W = W;
  Mat power = Mat::Identity(n, n);
  for (int j = 0; j < tube.L; ++j) {
    tube.terms.push_back(power);
    tube.mapped_w_vertices.push_back(power * Wv);
    power = Acl * power;
  }

  // Candidate normals; each offset below is the exact support of the sum.
  std::vector<Vec> dirs;
  for (int i = 0; i < n; ++i) {
    dirs.push_back(Vec::Unit(n, i));
    dirs.push_back(-Vec::Unit(n, i));
  }
  for (int i = 0; i < K.rows(); ++i) {
    if (K.row(i).norm() <= 1e-12) continue;
    dirs.push_back(K.row(i).transpose());
    dirs.push_back(-K.row(i).transpose());
  }
  for (int i = 0; i < W.rows(); ++i) {
    if (W.H.row(i).norm() > 1e-12) dirs.push_back(W.H.row(i).transpose());
  }
  Eigen::FullPivLU<Mat> lu(Acl);
  if (lu.isInvertible()) {
    const Mat inv = lu.inverse();
    Mat mapped = W.H;
    for (int j = 1; j < tube.L; ++j) {
      mapped = mapped * inv;
      for (int i = 0; i < W.rows(); ++i) {
        const Vec d = mapped.row(i).transpose();
        if (d.norm() > 1e-12) dirs.push_back(d / d.norm());
      }
    }
  }
  Mat H(dirs.size(), n);
  Vec h(dirs.size());
  for (std::size_t i = 0; i < dirs.size(); ++i) {
    const Vec d = dirs[i] / dirs[i].norm();
    H.row(static_cast<Eigen::Index>(i)) = d.transpose();
    h(static_cast<Eigen::Index>(i)) = tube.support(d);
  }
  tube.S = remove_redundant(HPolytope(H, h));
  return tube;
}

}  // namespace ncsmpc
