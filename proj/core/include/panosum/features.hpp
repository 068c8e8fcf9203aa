#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "panosum/image.hpp"

namespace panosum::features {

using io::Image;

/// Oriented corner with its FAST arc score.
struct Keypoint {
  double x = 0;
  double y = 0;
  double score = 0;
  double orientation = 0;  // radians in [-pi, pi]
};

/// 256-bit binary descriptor.
struct Descriptor {
  std::array<std::uint64_t, 4> bits{};

  bool operator==(const Descriptor& o) const = default;
};

struct Match {
  int index_a = 0;
  int index_b = 0;
  int distance = 0;  // Hamming bit count, 0..256
};

inline constexpr std::uint32_t kDefaultPatternSeed = 0x9E3779B9u;

/// Margin keeping every rotated descriptor sample inside the image:
/// ceil(15 * sqrt(2)) for the pattern reach plus one for rounding slack.
inline constexpr int kDescribeMargin = 22;

int hamming_distance(const Descriptor& a, const Descriptor& b);

/// FAST-9 segment test (16-pixel Bresenham circle of radius 3) with
/// non-max suppression on the arc SAD score. Keypoints are kept at least
/// `border_margin` pixels from every border (>= 3, the circle radius).
/// Orientation is the intensity centroid angle over a radius-15 disc,
/// clipped at the image boundary. At most `max_keypoints` are returned,
/// strongest first.
std::vector<Keypoint> detect_corners(const Image& gray, int threshold,
                                     int max_keypoints, int border_margin = 3);

/// Iteratively recenters keypoints on the local Gaussian-weighted intensity
/// centroid. Total shift is clamped to `max_shift` pixels and keypoints never
/// move inside `border_margin`.
void refine_keypoints_centroid(const Image& gray, std::vector<Keypoint>& kps,
                               int border_margin, double max_shift = 1.5);

/// 256 point-pair tests in [-15,15]^2, generated once from `pattern_seed`,
/// steered by the keypoint orientation. The image must be pre-smoothed
/// (gaussian_smooth with sigma 2, 7x7). Throws OutOfBounds if any rotated
/// sample would leave the image.
Descriptor describe(const Image& gray_smoothed, const Keypoint& keypoint,
                    std::uint32_t pattern_seed = kDefaultPatternSeed);

std::vector<Descriptor> describe_all(const Image& gray_smoothed,
                                     const std::vector<Keypoint>& keypoints,
                                     std::uint32_t pattern_seed = kDefaultPatternSeed);

/// Lowe ratio matching on Hamming distance with optional cross-check.
/// A candidate is kept iff d(best) < ratio * d(second-best); ties at a
/// zero second-best distance are rejected. Output is unique per index_a.
std::vector<Match> match_descriptors(const std::vector<Descriptor>& set_a,
                                     const std::vector<Descriptor>& set_b,
                                     double ratio = 0.8,
                                     bool cross_check = true);

}  // namespace panosum::features
