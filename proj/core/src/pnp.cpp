#include "panosum/pnp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include <Eigen/Dense>

#include "panosum/errors.hpp"
#include "panosum/rng.hpp"

namespace panosum::vo {
namespace {

constexpr int kMinimalSample = 6;
constexpr int kMaxGnIterations = 50;
constexpr int kMaxHalvings = 10;
constexpr double kUpdateTolerance = 1e-10;

std::optional<Eigen::Vector2d> project(const Pose& pose, const io::CameraIntrinsics& k,
                                       const Eigen::Vector3d& X) {
  const Eigen::Vector3d pc = pose.R * X + pose.t;
  if (pc.z() <= 0) return std::nullopt;
  return Eigen::Vector2d(k.fx * pc.x() / pc.z() + k.cx, k.fy * pc.y() / pc.z() + k.cy);
}

double total_cost(const std::vector<Eigen::Vector3d>& p3, const std::vector<Eigen::Vector2d>& p2,
                  const io::CameraIntrinsics& k, const Pose& pose, const std::vector<int>& idx) {
  double cost = 0;
  for (int i : idx) {
    const auto proj = project(pose, k, p3[static_cast<std::size_t>(i)]);
    if (!proj) return std::numeric_limits<double>::infinity();
    cost += (*proj - p2[static_cast<std::size_t>(i)]).squaredNorm();
  }
  return cost;
}

/// Minimal DLT resection from 6 points in normalized camera coordinates.
/// 3D points are conditioned (centroid to origin, mean norm sqrt(3)).
/// Returns nullopt when the system is degenerate.
std::optional<Pose> dlt_resection(const std::vector<Eigen::Vector3d>& p3,
                                  const std::vector<Eigen::Vector2d>& p2_norm,
                                  const std::vector<int>& sample) {
  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  for (int i : sample) centroid += p3[static_cast<std::size_t>(i)];
  centroid /= static_cast<double>(sample.size());
  double mean_norm = 0;
  for (int i : sample) mean_norm += (p3[static_cast<std::size_t>(i)] - centroid).norm();
  mean_norm /= static_cast<double>(sample.size());
  const double s = mean_norm > 1e-300 ? std::sqrt(3.0) / mean_norm : 1.0;

  Eigen::MatrixXd m(2 * static_cast<Eigen::Index>(sample.size()), 12);
  for (std::size_t r = 0; r < sample.size(); ++r) {
    const Eigen::Vector3d X = (p3[static_cast<std::size_t>(sample[r])] - centroid) * s;
    const Eigen::Vector2d& x = p2_norm[static_cast<std::size_t>(sample[r])];
    const Eigen::Index row = 2 * static_cast<Eigen::Index>(r);
    m.row(row) << X.x(), X.y(), X.z(), 1, 0, 0, 0, 0, -x.x() * X.x(), -x.x() * X.y(),
        -x.x() * X.z(), -x.x();
    m.row(row + 1) << 0, 0, 0, 0, X.x(), X.y(), X.z(), 1, -x.y() * X.x(), -x.y() * X.y(),
        -x.y() * X.z(), -x.y();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeFullV);
  const Eigen::VectorXd p = svd.matrixV().col(11);
  Eigen::Matrix<double, 3, 4> P;
  P.row(0) = p.segment<4>(0);
  P.row(1) = p.segment<4>(4);
  P.row(2) = p.segment<4>(8);

  Eigen::Matrix3d M = P.leftCols<3>();
  if (M.determinant() < 0) {
    P = -P;
    M = -M;
  }
  Eigen::JacobiSVD<Eigen::Matrix3d> msvd(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const double scale = msvd.singularValues().mean();
  if (!(scale > 1e-12) || msvd.singularValues()(2) < 1e-9 * msvd.singularValues()(0)) {
    return std::nullopt;
  }
  Pose pose;
  pose.R = msvd.matrixU() * msvd.matrixV().transpose();
  // Undo the 3D conditioning X' = s(X - centroid): the conditioned pose maps
  // x ~ R X' + t_cond, so in world units t = t_cond/s - R*centroid.
  const Eigen::Vector3d t_cond = P.col(3) / scale;
  pose.t = t_cond / s - pose.R * centroid;
  return pose;
}

Pose apply_update(const Pose& pose, const Eigen::Matrix<double, 6, 1>& delta) {
  Pose out;
  out.R = orthonormalize(rodrigues(delta.head<3>()) * pose.R);
  out.t = pose.t + delta.tail<3>();
  return out;
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

}  // namespace

double reprojection_error(const Pose& pose, const io::CameraIntrinsics& intrinsics,
                          const Eigen::Vector3d& X, const Eigen::Vector2d& x_observed) {
  const auto proj = project(pose, intrinsics, X);
  if (!proj) throw BehindCamera("reprojection_error: point has non-positive depth");
  return (*proj - x_observed).norm();
}

Eigen::Matrix<double, 2, 6> reprojection_jacobian(const Pose& pose,
                                                  const io::CameraIntrinsics& intrinsics,
                                                  const Eigen::Vector3d& X) {
  const Eigen::Vector3d rotated = pose.R * X;  // exp([w]x) acts on this, not on t
  const Eigen::Vector3d pc = rotated + pose.t;
  if (pc.z() <= 0) throw BehindCamera("reprojection_jacobian: point has non-positive depth");
  const double iz = 1.0 / pc.z();
  Eigen::Matrix<double, 2, 3> jproj;
  jproj << intrinsics.fx * iz, 0, -intrinsics.fx * pc.x() * iz * iz,
      0, intrinsics.fy * iz, -intrinsics.fy * pc.y() * iz * iz;
  Eigen::Matrix<double, 3, 6> jpose;
  jpose.leftCols<3>() = -skew(rotated);
  jpose.rightCols<3>() = Eigen::Matrix3d::Identity();
  return jproj * jpose;
}

Pose refine_pose_gauss_newton(const std::vector<Eigen::Vector3d>& points3d,
                              const std::vector<Eigen::Vector2d>& points2d,
                              const io::CameraIntrinsics& intrinsics, const Pose& initial,
                              const std::vector<int>& indices, GaussNewtonStats* stats) {
  if (points3d.size() != points2d.size()) {
    throw InvalidValue("refine_pose_gauss_newton: size mismatch");
  }
  Pose pose = initial;
  double cost = total_cost(points3d, points2d, intrinsics, pose, indices);
  if (stats) {
    stats->initial_cost = cost;
    stats->final_cost = cost;
    stats->iterations = 0;
    stats->last_update_norm = 0;
  }
  if (!std::isfinite(cost) || indices.empty()) return pose;

  for (int iter = 0; iter < kMaxGnIterations; ++iter) {
    Eigen::Matrix<double, 6, 6> h = Eigen::Matrix<double, 6, 6>::Zero();
    Eigen::Matrix<double, 6, 1> g = Eigen::Matrix<double, 6, 1>::Zero();
    for (int i : indices) {
      const auto proj = project(pose, intrinsics, points3d[static_cast<std::size_t>(i)]);
      if (!proj) continue;  // cost already finite; rounding pushed the point to the plane
      const Eigen::Vector2d r = *proj - points2d[static_cast<std::size_t>(i)];
      const auto j = reprojection_jacobian(pose, intrinsics, points3d[static_cast<std::size_t>(i)]);
      h += j.transpose() * j;
      g += j.transpose() * r;
    }
    const Eigen::Matrix<double, 6, 1> delta = h.ldlt().solve(-g);
    if (!delta.allFinite()) break;

    double step = 1.0;
    bool accepted = false;
    for (int halv = 0; halv <= kMaxHalvings; ++halv) {
      const Eigen::Matrix<double, 6, 1> scaled = step * delta;
      const Pose candidate = apply_update(pose, scaled);
      const double c = total_cost(points3d, points2d, intrinsics, candidate, indices);
      if (c <= cost) {
        pose = candidate;
        cost = c;
        accepted = true;
        if (stats) {
          stats->iterations = iter + 1;
          stats->final_cost = cost;
          stats->last_update_norm = scaled.norm();
        }
        if (scaled.norm() < kUpdateTolerance) return pose;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
  }
  return pose;
}

PnpResult estimate_pose_pnp(const std::vector<Eigen::Vector3d>& points3d,
                            const std::vector<Eigen::Vector2d>& points2d,
                            const io::CameraIntrinsics& intrinsics, const Pose& initial_pose,
                            double threshold_px, int max_iters, std::uint64_t seed) {
  if (points3d.size() != points2d.size()) {
    throw InvalidValue("estimate_pose_pnp: size mismatch");
  }
  const int n = static_cast<int>(points3d.size());
  if (n < kMinimalSample) {
    throw InsufficientCorrespondences("estimate_pose_pnp: need 6, got " + std::to_string(n));
  }
  std::vector<Eigen::Vector2d> p2_norm(points2d.size());
  for (int i = 0; i < n; ++i) {
    const auto& p = points2d[static_cast<std::size_t>(i)];
    p2_norm[static_cast<std::size_t>(i)] = {(p.x() - intrinsics.cx) / intrinsics.fx,
                                            (p.y() - intrinsics.cy) / intrinsics.fy};
  }

  const auto score = [&](const Pose& pose) {
    std::vector<int> inliers;
    for (int i = 0; i < n; ++i) {
      const auto proj = project(pose, intrinsics, points3d[static_cast<std::size_t>(i)]);
      if (proj && (*proj - points2d[static_cast<std::size_t>(i)]).norm() < threshold_px) {
        inliers.push_back(i);
      }
    }
    return inliers;
  };

  Rng rng(seed);
  Pose best_pose = initial_pose;
  std::vector<int> best_inliers = score(initial_pose);
  int needed = max_iters;
  if (!best_inliers.empty()) {
    needed = std::min(needed, adaptive_iters(static_cast<int>(best_inliers.size()), n,
                                             kMinimalSample, max_iters));
  }
  std::vector<int> sample(kMinimalSample);
  std::vector<int> pool(static_cast<std::size_t>(n));
  for (int iter = 0; iter < needed; ++iter) {
    for (int i = 0; i < n; ++i) pool[static_cast<std::size_t>(i)] = i;
    for (int k = 0; k < kMinimalSample; ++k) {
      const auto j = k + static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(n - k)));
      std::swap(pool[static_cast<std::size_t>(k)], pool[static_cast<std::size_t>(j)]);
      sample[static_cast<std::size_t>(k)] = pool[static_cast<std::size_t>(k)];
    }
    const auto hypo = dlt_resection(points3d, p2_norm, sample);
    if (!hypo) continue;
    std::vector<int> inliers = score(*hypo);
    if (inliers.size() > best_inliers.size()) {
      best_pose = *hypo;
      best_inliers = std::move(inliers);
      needed = std::min(needed, adaptive_iters(static_cast<int>(best_inliers.size()), n,
                                               kMinimalSample, max_iters));
    }
  }
  if (static_cast<int>(best_inliers.size()) < kMinimalSample) {
    throw NoConsensus("estimate_pose_pnp: best consensus " +
                      std::to_string(best_inliers.size()) + " below 6");
  }

  const Pose refined = refine_pose_gauss_newton(points3d, points2d, intrinsics, best_pose,
                                                best_inliers);
  std::vector<int> final_inliers = score(refined);
  if (static_cast<int>(final_inliers.size()) < kMinimalSample) {
    return {best_pose, std::move(best_inliers)};
  }
  return {refined, std::move(final_inliers)};
}

}  // namespace panosum::vo
