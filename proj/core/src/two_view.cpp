#include "panosum/two_view.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/Dense>

#include "panosum/errors.hpp"
#include "panosum/rng.hpp"

namespace panosum::vo {
namespace {

Eigen::Vector2d normalize_point(const Eigen::Vector2d& p, const io::CameraIntrinsics& k) {
  return {(p.x() - k.cx) / k.fx, (p.y() - k.cy) / k.fy};
}

/// Hartley normalization: translate centroid to origin, scale mean distance
/// to sqrt(2). Returns the 3x3 similarity applied to the points.
Eigen::Matrix3d hartley_transform(const std::vector<Eigen::Vector2d>& pts,
                                  const std::vector<int>& idx) {
  Eigen::Vector2d centroid = Eigen::Vector2d::Zero();
  for (int i : idx) centroid += pts[static_cast<std::size_t>(i)];
  centroid /= static_cast<double>(idx.size());
  double mean_dist = 0;
  for (int i : idx) mean_dist += (pts[static_cast<std::size_t>(i)] - centroid).norm();
  mean_dist /= static_cast<double>(idx.size());
  const double s = mean_dist > 1e-300 ? std::numbers::sqrt2 / mean_dist : 1.0;
  Eigen::Matrix3d t;
  t << s, 0, -s * centroid.x(), 0, s, -s * centroid.y(), 0, 0, 1;
  return t;
}

/// 8-point DLT on the selected correspondences (already in normalized camera
/// coordinates), with Hartley conditioning. Singular values not enforced here.
Eigen::Matrix3d eight_point(const std::vector<Eigen::Vector2d>& a,
                            const std::vector<Eigen::Vector2d>& b,
                            const std::vector<int>& idx) {
  const Eigen::Matrix3d ta = hartley_transform(a, idx);
  const Eigen::Matrix3d tb = hartley_transform(b, idx);
  Eigen::MatrixXd m(static_cast<Eigen::Index>(idx.size()), 9);
  for (std::size_t r = 0; r < idx.size(); ++r) {
    const auto& pa = a[static_cast<std::size_t>(idx[r])];
    const auto& pb = b[static_cast<std::size_t>(idx[r])];
    const double xa = ta(0, 0) * pa.x() + ta(0, 2);
    const double ya = ta(1, 1) * pa.y() + ta(1, 2);
    const double xb = tb(0, 0) * pb.x() + tb(0, 2);
    const double yb = tb(1, 1) * pb.y() + tb(1, 2);
    m.row(static_cast<Eigen::Index>(r)) << xb * xa, xb * ya, xb, yb * xa, yb * ya, yb,
        xa, ya, 1.0;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeFullV);
  const Eigen::VectorXd e = svd.matrixV().col(8);
  Eigen::Matrix3d eh;
  eh << e(0), e(1), e(2), e(3), e(4), e(5), e(6), e(7), e(8);
  return tb.transpose() * eh * ta;
}

Eigen::Matrix3d enforce_essential(const Eigen::Matrix3d& e) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(e, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return svd.matrixU() * Eigen::Vector3d(1, 1, 0).asDiagonal() *
         svd.matrixV().transpose();
}

int adaptive_iters(int inliers, int total, int sample_size, int cap) {
  const double w = static_cast<double>(inliers) / static_cast<double>(total);
  const double p_sample = std::pow(w, sample_size);
  if (p_sample >= 1.0) return 1;
  if (p_sample <= 0.0) return cap;
  const double n = std::log(1.0 - 0.99) / std::log(1.0 - p_sample);
  if (!(n < static_cast<double>(cap))) return cap;
  return std::max(1, static_cast<int>(std::ceil(n)));
}

/// Depth of the triangulated midpoint-free DLT solve in both normalized
/// cameras, for cheirality voting. P_a = [I|0], P_b = [R|t].
std::pair<bool, bool> depths_positive(const Eigen::Matrix3d& r, const Eigen::Vector3d& t,
                                      const Eigen::Vector2d& xa, const Eigen::Vector2d& xb) {
  Eigen::Matrix4d m;
  m.row(0) << -1, 0, xa.x(), 0;
  m.row(1) << 0, -1, xa.y(), 0;
  Eigen::Matrix<double, 3, 4> pb;
  pb.leftCols<3>() = r;
  pb.col(3) = t;
  m.row(2) = xb.x() * pb.row(2) - pb.row(0);
  m.row(3) = xb.y() * pb.row(2) - pb.row(1);
  Eigen::JacobiSVD<Eigen::Matrix4d> svd(m, Eigen::ComputeFullV);
  const Eigen::Vector4d xh = svd.matrixV().col(3);
  if (std::abs(xh(3)) < 1e-14) return {false, false};
  const Eigen::Vector3d x = xh.head<3>() / xh(3);
  const double za = x.z();
  const double zb = (r * x + t).z();
  return {za > 0, zb > 0};
}

}  // namespace

double sampson_distance(const Eigen::Matrix3d& E, const Eigen::Vector2d& xa_norm,
                        const Eigen::Vector2d& xb_norm) {
  const Eigen::Vector3d xa(xa_norm.x(), xa_norm.y(), 1.0);
  const Eigen::Vector3d xb(xb_norm.x(), xb_norm.y(), 1.0);
  const Eigen::Vector3d ea = E * xa;
  const Eigen::Vector3d eb = E.transpose() * xb;
  const double err = xb.dot(ea);
  const double denom = ea.x() * ea.x() + ea.y() * ea.y() + eb.x() * eb.x() + eb.y() * eb.y();
  if (denom < 1e-300) return std::numeric_limits<double>::infinity();
  return std::sqrt(err * err / denom);
}

EssentialResult estimate_essential_ransac(const std::vector<Eigen::Vector2d>& points_a,
                                          const std::vector<Eigen::Vector2d>& points_b,
                                          const io::CameraIntrinsics& intrinsics,
                                          double threshold_px, int max_iters,
                                          std::uint64_t seed) {
  if (points_a.size() != points_b.size()) {
    throw InvalidValue("estimate_essential_ransac: size mismatch");
  }
  const int n = static_cast<int>(points_a.size());
  if (n < 8) {
    throw InsufficientCorrespondences("estimate_essential_ransac: need 8, got " +
                                      std::to_string(n));
  }
  std::vector<Eigen::Vector2d> na(points_a.size());
  std::vector<Eigen::Vector2d> nb(points_b.size());
  for (int i = 0; i < n; ++i) {
    na[static_cast<std::size_t>(i)] = normalize_point(points_a[static_cast<std::size_t>(i)], intrinsics);
    nb[static_cast<std::size_t>(i)] = normalize_point(points_b[static_cast<std::size_t>(i)], intrinsics);
  }
  const double threshold = threshold_px / ((intrinsics.fx + intrinsics.fy) / 2.0);

  Rng rng(seed);
  std::vector<int> best_inliers;
  int needed = max_iters;
  std::vector<int> sample(8);
  for (int iter = 0; iter < needed; ++iter) {
    // Distinct 8-subset by partial Fisher-Yates over an index pool.
    std::vector<int> pool(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) pool[static_cast<std::size_t>(i)] = i;
    for (int k = 0; k < 8; ++k) {
      const auto j = k + static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(n - k)));
      std::swap(pool[static_cast<std::size_t>(k)], pool[static_cast<std::size_t>(j)]);
      sample[static_cast<std::size_t>(k)] = pool[static_cast<std::size_t>(k)];
    }
    const Eigen::Matrix3d e = enforce_essential(eight_point(na, nb, sample));
    std::vector<int> inliers;
    for (int i = 0; i < n; ++i) {
      if (sampson_distance(e, na[static_cast<std::size_t>(i)], nb[static_cast<std::size_t>(i)]) < threshold) {
        inliers.push_back(i);
      }
    }
    if (inliers.size() > best_inliers.size()) {
      best_inliers = std::move(inliers);
      needed = std::min(needed, adaptive_iters(static_cast<int>(best_inliers.size()), n, 8, max_iters));
    }
  }
  if (static_cast<int>(best_inliers.size()) < 8) {
    throw DegenerateConfiguration("estimate_essential_ransac: consensus below 8 (" +
                                  std::to_string(best_inliers.size()) + ")");
  }

  const Eigen::Matrix3d e_final = enforce_essential(eight_point(na, nb, best_inliers));
  std::vector<int> final_inliers;
  for (int i = 0; i < n; ++i) {
    if (sampson_distance(e_final, na[static_cast<std::size_t>(i)], nb[static_cast<std::size_t>(i)]) < threshold) {
      final_inliers.push_back(i);
    }
  }
  if (static_cast<int>(final_inliers.size()) < 8) final_inliers = std::move(best_inliers);
  return {e_final, std::move(final_inliers)};
}

Pose decompose_essential(const Eigen::Matrix3d& E,
                         const std::vector<Eigen::Vector2d>& points_a,
                         const std::vector<Eigen::Vector2d>& points_b,
                         const io::CameraIntrinsics& intrinsics) {
  if (points_a.size() != points_b.size() || points_a.empty()) {
    throw InvalidValue("decompose_essential: need matching non-empty correspondences");
  }
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(E, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d u = svd.matrixU();
  Eigen::Matrix3d v = svd.matrixV();
  if (u.determinant() < 0) u = -u;
  if (v.determinant() < 0) v = -v;
  Eigen::Matrix3d w;
  w << 0, -1, 0, 1, 0, 0, 0, 0, 1;
  const Eigen::Matrix3d r1 = u * w * v.transpose();
  const Eigen::Matrix3d r2 = u * w.transpose() * v.transpose();
  const Eigen::Vector3d t = u.col(2);

  const Eigen::Matrix3d rs[4] = {r1, r1, r2, r2};
  const Eigen::Vector3d ts[4] = {t, -t, t, -t};
  int votes[4] = {0, 0, 0, 0};
  for (std::size_t i = 0; i < points_a.size(); ++i) {
    const Eigen::Vector2d xa = normalize_point(points_a[i], intrinsics);
    const Eigen::Vector2d xb = normalize_point(points_b[i], intrinsics);
    for (int c = 0; c < 4; ++c) {
      const auto [da, db] = depths_positive(rs[c], ts[c], xa, xb);
      if (da && db) ++votes[c];
    }
  }
  int best = 0;
  for (int c = 1; c < 4; ++c) {
    if (votes[c] > votes[best]) best = c;
  }
  if (votes[best] == 0) {
    throw CheiralityFailure("decompose_essential: no candidate places points in front");
  }
  for (int c = 0; c < 4; ++c) {
    if (c != best && votes[c] == votes[best]) {
      throw CheiralityFailure("decompose_essential: cheirality vote tied");
    }
  }
  return {rs[best], ts[best].normalized()};
}

TriangulationResult triangulate(const Pose& pose_a, const Pose& pose_b,
                                const Eigen::Vector2d& x_a, const Eigen::Vector2d& x_b,
                                const io::CameraIntrinsics& intrinsics) {
  if ((pose_a.center() - pose_b.center()).norm() <= 1e-9) {
    throw ZeroBaseline("triangulate: camera centers coincide");
  }
  const Eigen::Vector2d na = normalize_point(x_a, intrinsics);
  const Eigen::Vector2d nb = normalize_point(x_b, intrinsics);
  Eigen::Matrix<double, 3, 4> pa;
  pa.leftCols<3>() = pose_a.R;
  pa.col(3) = pose_a.t;
  Eigen::Matrix<double, 3, 4> pb;
  pb.leftCols<3>() = pose_b.R;
  pb.col(3) = pose_b.t;

  Eigen::Matrix4d m;
  m.row(0) = na.x() * pa.row(2) - pa.row(0);
  m.row(1) = na.y() * pa.row(2) - pa.row(1);
  m.row(2) = nb.x() * pb.row(2) - pb.row(0);
  m.row(3) = nb.y() * pb.row(2) - pb.row(1);
  Eigen::JacobiSVD<Eigen::Matrix4d> svd(m, Eigen::ComputeFullV);
  const Eigen::Vector4d xh = svd.matrixV().col(3);
  if (std::abs(xh(3)) <= 1e-12) {
    throw PointAtInfinity("triangulate: homogeneous w near zero");
  }
  TriangulationResult res;
  res.point = xh.head<3>() / xh(3);
  res.positive_depth_a = (pose_a.R * res.point + pose_a.t).z() > 0;
  res.positive_depth_b = (pose_b.R * res.point + pose_b.t).z() > 0;
  return res;
}

}  // namespace panosum::vo
