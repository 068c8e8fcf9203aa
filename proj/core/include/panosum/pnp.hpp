#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "panosum/image.hpp"
#include "panosum/pose.hpp"

namespace panosum::vo {

/// Pixel distance between the projection of X under `pose` and `x_observed`.
/// X must have positive depth in the camera.
double reprojection_error(const Pose& pose, const io::CameraIntrinsics& intrinsics,
                          const Eigen::Vector3d& X, const Eigen::Vector2d& x_observed);

/// Jacobian of the 2D reprojection residual w.r.t. the 6 pose parameters
/// (left-multiplicative axis-angle delta, then translation delta): the
/// perturbed pose is R <- exp([w]x) R, t <- t + tau at (w, tau) = 0.
/// Columns 0..2 are d/dw, columns 3..5 are d/dtau.
Eigen::Matrix<double, 2, 6> reprojection_jacobian(const Pose& pose,
                                                  const io::CameraIntrinsics& intrinsics,
                                                  const Eigen::Vector3d& X);

struct GaussNewtonStats {
  int iterations = 0;
  double initial_cost = 0;  // sum of squared pixel residuals
  double final_cost = 0;
  double last_update_norm = 0;
};

/// Pose-only Gauss-Newton over the listed correspondences. Accepted steps
/// never increase the cost (step halving, up to 10 halvings); stops when the
/// applied update norm drops below 1e-10 or after 50 iterations. Rotation is
/// re-orthonormalized after every accepted step.
Pose refine_pose_gauss_newton(const std::vector<Eigen::Vector3d>& points3d,
                              const std::vector<Eigen::Vector2d>& points2d,
                              const io::CameraIntrinsics& intrinsics, const Pose& initial,
                              const std::vector<int>& indices,
                              GaussNewtonStats* stats = nullptr);

struct PnpResult {
  Pose pose;
  std::vector<int> inliers;
};

/// RANSAC over minimal 6-point DLT resections, scored by reprojection error
/// below threshold_px; initial_pose enters the pool as hypothesis zero. The
/// winner is refined by Gauss-Newton on its inliers.
PnpResult estimate_pose_pnp(const std::vector<Eigen::Vector3d>& points3d,
                            const std::vector<Eigen::Vector2d>& points2d,
                            const io::CameraIntrinsics& intrinsics, const Pose& initial_pose,
                            double threshold_px = 2.0, int max_iters = 2000,
                            std::uint64_t seed = 0);

}  // namespace panosum::vo
