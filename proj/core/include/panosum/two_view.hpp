#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "panosum/image.hpp"
#include "panosum/pose.hpp"

namespace panosum::vo {

struct EssentialResult {
  Eigen::Matrix3d E;          // singular values enforced to (1, 1, 0)
  std::vector<int> inliers;   // indices into the correspondence arrays
};

/// Normalized 8-point algorithm inside RANSAC. Points are pixel coordinates;
/// they are mapped through K^-1 internally and the Sampson threshold is
/// threshold_px / ((fx + fy) / 2). Convention: x_b^T * E * x_a = 0.
/// Adaptive early exit at 99% confidence, capped at max_iters.
EssentialResult estimate_essential_ransac(const std::vector<Eigen::Vector2d>& points_a,
                                          const std::vector<Eigen::Vector2d>& points_b,
                                          const io::CameraIntrinsics& intrinsics,
                                          double threshold_px = 1.0,
                                          int max_iters = 2000,
                                          std::uint64_t seed = 0);

/// Sampson (first-order epipolar) distance for normalized coordinates.
double sampson_distance(const Eigen::Matrix3d& E, const Eigen::Vector2d& xa_norm,
                        const Eigen::Vector2d& xb_norm);

/// Relative pose of camera b w.r.t. camera a from the four SVD candidates,
/// selected by cheirality voting over the correspondences. ||t|| = 1.
/// A tie for the vote, or zero positive-depth points, throws CheiralityFailure.
Pose decompose_essential(const Eigen::Matrix3d& E,
                         const std::vector<Eigen::Vector2d>& points_a,
                         const std::vector<Eigen::Vector2d>& points_b,
                         const io::CameraIntrinsics& intrinsics);

struct TriangulationResult {
  Eigen::Vector3d point;
  bool positive_depth_a = false;
  bool positive_depth_b = false;
};

/// Linear DLT triangulation (SVD of the stacked 4x4 system) from pixel
/// observations in two distinct views.
TriangulationResult triangulate(const Pose& pose_a, const Pose& pose_b,
                                const Eigen::Vector2d& x_a, const Eigen::Vector2d& x_b,
                                const io::CameraIntrinsics& intrinsics);

}  // namespace panosum::vo
