#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "panosum/features.hpp"

namespace panosum::stitch {

/// Plane-projective transform, normalized so H(2,2) = 1, or to unit
/// Frobenius norm (sign-fixed) when H(2,2) is numerically zero.
struct Homography {
  Eigen::Matrix3d H = Eigen::Matrix3d::Identity();
};

Homography normalized(const Eigen::Matrix3d& h);

Eigen::Vector2d apply_homography(const Eigen::Matrix3d& h, const Eigen::Vector2d& p);

/// ||H a - b|| + ||H^-1 b - a|| in pixels.
double symmetric_transfer_error(const Eigen::Matrix3d& h, const Eigen::Vector2d& a,
                                const Eigen::Vector2d& b);

/// Hartley-normalized DLT mapping src -> dst. Degenerate inputs (collinear or
/// coincident points, detected as a non-unique smallest singular value) throw
/// DegenerateConfiguration.
Homography estimate_homography_dlt(const std::vector<Eigen::Vector2d>& src,
                                   const std::vector<Eigen::Vector2d>& dst);

struct HomographyResult {
  Homography h;               // maps keypoints_a coords to keypoints_b coords
  std::vector<int> inliers;   // indices into `matches`
};

/// Minimal 4-point DLT hypotheses scored by symmetric transfer error; the
/// winner is re-estimated by DLT over its consensus set.
HomographyResult estimate_homography_ransac(const std::vector<features::Match>& matches,
                                            const std::vector<features::Keypoint>& keypoints_a,
                                            const std::vector<features::Keypoint>& keypoints_b,
                                            double threshold_px = 3.0, int max_iters = 2000,
                                            std::uint64_t seed = 0);

}  // namespace panosum::stitch
