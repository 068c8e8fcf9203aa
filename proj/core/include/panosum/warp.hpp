#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "panosum/image.hpp"

namespace panosum::stitch {

/// x' = f*atan((x-cx)/f), y' = f*(y-cy)/sqrt((x-cx)^2 + f^2).
Eigen::Vector2d cylindrical_forward(const Eigen::Vector2d& p, double focal_px, double cx,
                                    double cy);

/// Analytic inverse of cylindrical_forward (valid for |x'/f| < pi/2).
Eigen::Vector2d cylindrical_inverse(const Eigen::Vector2d& q, double focal_px, double cx,
                                    double cy);

/// Bilinear lookup; (x, y) must lie inside [0, w-1] x [0, h-1].
double bilinear_sample(const io::Image& image, double x, double y, int channel);

struct WarpResult {
  io::Image image;  // same channel count as the input
  std::vector<std::uint8_t> mask;  // width*height, 1 where a preimage exists
  // Warped-space coordinates of output pixel (0, 0); the principal point
  // forward-maps to warped coordinates (0, 0).
  double origin_x = 0;
  double origin_y = 0;
};

/// Inverse-mapped bilinear cylindrical projection. The canvas covers the
/// forward-mapped extent of the source rectangle.
WarpResult cylindrical_warp(const io::Image& image, double focal_px, double cx, double cy);

}  // namespace panosum::stitch
