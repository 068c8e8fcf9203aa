#include "panosum/features.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdlib>

#include "panosum/errors.hpp"
#include "panosum/rng.hpp"

namespace panosum::features {
namespace {

// 16-pixel Bresenham circle of radius 3, clockwise from the top.
constexpr int kRing[16][2] = {
    {0, -3}, {1, -3}, {2, -2},  {3, -1},  {3, 0},   {3, 1},   {2, 2},  {1, 3},
    {0, 3},  {-1, 3}, {-2, 2},  {-3, 1},  {-3, 0},  {-3, -1}, {-2, -2}, {-1, -3}};

constexpr int kFastRadius = 3;
constexpr int kArcLength = 9;
constexpr int kOrientationRadius = 15;
constexpr double kSuppressionRadiusSq = 9.0;  // NMS: closer than 3 px

struct Candidate {
  int x;
  int y;
  double score;
};

// Longest circular run of `polarity` in classify[16], with its start index.
// Returns length 0 when the polarity never occurs.
std::pair<int, int> longest_run(const int classify[16], int polarity) {
  int best_len = 0;
  int best_start = 0;
  int len = 0;
  // Doubling the scan handles wrap-around; runs are capped at 16.
  for (int i = 0; i < 32; ++i) {
    if (classify[i & 15] == polarity) {
      ++len;
      if (len > best_len) {
        best_len = len;
        best_start = i - len + 1;
      }
    } else {
      len = 0;
    }
  }
  if (best_len > 16) best_len = 16;
  return {best_len, ((best_start % 16) + 16) % 16};
}

double orientation_at(const Image& gray, int x, int y) {
  std::int64_t m10 = 0;
  std::int64_t m01 = 0;
  const int r = kOrientationRadius;
  for (int dy = -r; dy <= r; ++dy) {
    const int py = y + dy;
    if (py < 0 || py >= gray.height) continue;
    for (int dx = -r; dx <= r; ++dx) {
      const int px = x + dx;
      if (px < 0 || px >= gray.width) continue;
      if (dx * dx + dy * dy > r * r) continue;
      const std::int64_t v = gray.at(px, py);
      m10 += dx * v;
      m01 += dy * v;
    }
  }
  return std::atan2(static_cast<double>(m01), static_cast<double>(m10));
}

std::array<std::array<int, 4>, 256> build_pattern(std::uint32_t seed) {
  std::array<std::array<int, 4>, 256> pattern;
  Rng rng(seed);
  for (auto& pair : pattern) {
    do {
      for (int k = 0; k < 4; ++k) {
        pair[k] = static_cast<int>(rng.uniform_int(-15, 15));
      }
    } while (pair[0] == pair[2] && pair[1] == pair[3]);
  }
  return pattern;
}

Descriptor describe_with_pattern(const Image& gray,
                                 const std::array<std::array<int, 4>, 256>& pattern,
                                 const Keypoint& kp) {
  const double c = std::cos(kp.orientation);
  const double s = std::sin(kp.orientation);
  Descriptor d;
  for (int i = 0; i < 256; ++i) {
    const auto& t = pattern[static_cast<std::size_t>(i)];
    const long px = std::lround(kp.x + t[0] * c - t[1] * s);
    const long py = std::lround(kp.y + t[0] * s + t[1] * c);
    const long qx = std::lround(kp.x + t[2] * c - t[3] * s);
    const long qy = std::lround(kp.y + t[2] * s + t[3] * c);
    if (px < 0 || px >= gray.width || py < 0 || py >= gray.height ||
        qx < 0 || qx >= gray.width || qy < 0 || qy >= gray.height) {
      throw OutOfBounds("descriptor sample outside image at keypoint (" +
                        std::to_string(kp.x) + ", " + std::to_string(kp.y) + ")");
    }
    const bool bit = gray.at(static_cast<int>(px), static_cast<int>(py)) <
                     gray.at(static_cast<int>(qx), static_cast<int>(qy));
    if (bit) d.bits[static_cast<std::size_t>(i >> 6)] |= std::uint64_t{1} << (i & 63);
  }
  return d;
}

}  // namespace

int hamming_distance(const Descriptor& a, const Descriptor& b) {
  int d = 0;
  for (int k = 0; k < 4; ++k) {
    d += std::popcount(a.bits[static_cast<std::size_t>(k)] ^
                       b.bits[static_cast<std::size_t>(k)]);
  }
  return d;
}

std::vector<Keypoint> detect_corners(const Image& gray, int threshold,
                                     int max_keypoints, int border_margin) {
  if (gray.channels != 1 || !gray.valid()) {
    throw InvalidValue("detect_corners expects a valid 1-channel image");
  }
  if (threshold < 1) throw InvalidValue("detect_corners: threshold must be >= 1");
  if (max_keypoints < 0) throw InvalidValue("detect_corners: negative max_keypoints");
  const int margin = std::max(border_margin, kFastRadius);
  if (gray.width < 2 * margin + 1 || gray.height < 2 * margin + 1) {
    throw ImageTooSmall("detect_corners: image smaller than " +
                        std::to_string(2 * margin + 1) + " per side");
  }
  if (max_keypoints == 0) return {};

  std::vector<Candidate> candidates;
  for (int y = margin; y < gray.height - margin; ++y) {
    for (int x = margin; x < gray.width - margin; ++x) {
      const int c = gray.at(x, y);
      const int hi = c + threshold;
      const int lo = c - threshold;

      // Compass pre-test: any contiguous arc of 9 covers at least two of the
      // four compass pixels, so fewer than two on each side cannot qualify.
      int bright = 0;
      int dark = 0;
      for (int k = 0; k < 16; k += 4) {
        const int v = gray.at(x + kRing[k][0], y + kRing[k][1]);
        if (v > hi) ++bright;
        else if (v < lo) ++dark;
      }
      if (bright < 2 && dark < 2) continue;

      int classify[16];
      for (int k = 0; k < 16; ++k) {
        const int v = gray.at(x + kRing[k][0], y + kRing[k][1]);
        classify[k] = v > hi ? 1 : (v < lo ? -1 : 0);
      }

      for (const int polarity : {1, -1}) {
        const auto [len, start] = longest_run(classify, polarity);
        if (len < kArcLength) continue;
        double score = 0;
        for (int k = 0; k < len; ++k) {
          const int idx = (start + k) & 15;
          score += std::abs(gray.at(x + kRing[idx][0], y + kRing[idx][1]) - c);
        }
        candidates.push_back({x, y, score});
        break;  // runs of >= 9 in both polarities cannot coexist on 16 pixels
      }
    }
  }

  std::sort(candidates.begin(), candidates.end(),
            [](const Candidate& a, const Candidate& b) {
              if (a.score != b.score) return a.score > b.score;
              if (a.y != b.y) return a.y < b.y;
              return a.x < b.x;
            });

  // Greedy NMS on a coarse grid; cell size 4 > suppression radius 3, so only
  // the 3x3 cell neighborhood needs checking.
  const int cell = 4;
  const int gw = (gray.width + cell - 1) / cell;
  const int gh = (gray.height + cell - 1) / cell;
  std::vector<std::vector<int>> grid(static_cast<std::size_t>(gw) * gh);
  std::vector<Keypoint> kept;
  for (const Candidate& cand : candidates) {
    const int cx = cand.x / cell;
    const int cy = cand.y / cell;
    bool suppressed = false;
    for (int gy = std::max(0, cy - 1); gy <= std::min(gh - 1, cy + 1) && !suppressed; ++gy) {
      for (int gx = std::max(0, cx - 1); gx <= std::min(gw - 1, cx + 1) && !suppressed; ++gx) {
        for (const int idx : grid[static_cast<std::size_t>(gy) * gw + gx]) {
          const double dx = kept[static_cast<std::size_t>(idx)].x - cand.x;
          const double dy = kept[static_cast<std::size_t>(idx)].y - cand.y;
          if (dx * dx + dy * dy < kSuppressionRadiusSq) {
            suppressed = true;
            break;
          }
        }
      }
    }
    if (suppressed) continue;
    Keypoint kp;
    kp.x = cand.x;
    kp.y = cand.y;
    kp.score = cand.score;
    grid[static_cast<std::size_t>(cy) * gw + cx].push_back(static_cast<int>(kept.size()));
    kept.push_back(kp);
  }

  if (static_cast<int>(kept.size()) > max_keypoints) {
    kept.resize(static_cast<std::size_t>(max_keypoints));
  }
  for (Keypoint& kp : kept) {
    kp.orientation = orientation_at(gray, static_cast<int>(kp.x), static_cast<int>(kp.y));
  }
  return kept;
}

void refine_keypoints_centroid(const Image& gray, std::vector<Keypoint>& kps,
                               int border_margin, double max_shift) {
  if (gray.channels != 1 || !gray.valid()) {
    throw InvalidValue("refine_keypoints_centroid expects a valid 1-channel image");
  }
  constexpr int kWin = 5;       // gather half-width
  constexpr double kSigmaW = 2.0;
  const double inv2s2 = 1.0 / (2.0 * kSigmaW * kSigmaW);
  const double x_lo = border_margin;
  const double x_hi = gray.width - 1 - border_margin;
  const double y_lo = border_margin;
  const double y_hi = gray.height - 1 - border_margin;

  for (Keypoint& kp : kps) {
    const double ox = kp.x;
    const double oy = kp.y;
    double cx = ox;
    double cy = oy;
    for (int iter = 0; iter < 12; ++iter) {
      const int ix = static_cast<int>(std::lround(cx));
      const int iy = static_cast<int>(std::lround(cy));
      int lo = 255;
      for (int py = std::max(0, iy - kWin); py <= std::min(gray.height - 1, iy + kWin); ++py) {
        for (int px = std::max(0, ix - kWin); px <= std::min(gray.width - 1, ix + kWin); ++px) {
          lo = std::min(lo, static_cast<int>(gray.at(px, py)));
        }
      }
      double wsum = 0;
      double xsum = 0;
      double ysum = 0;
      for (int py = std::max(0, iy - kWin); py <= std::min(gray.height - 1, iy + kWin); ++py) {
        for (int px = std::max(0, ix - kWin); px <= std::min(gray.width - 1, ix + kWin); ++px) {
          const double dx = px - cx;
          const double dy = py - cy;
          const double w =
              (gray.at(px, py) - lo) * std::exp(-(dx * dx + dy * dy) * inv2s2);
          wsum += w;
          xsum += w * px;
          ysum += w * py;
        }
      }
      if (wsum <= 0) break;
      double nx = xsum / wsum;
      double ny = ysum / wsum;
      const double sx = nx - ox;
      const double sy = ny - oy;
      const double shift = std::sqrt(sx * sx + sy * sy);
      bool clamped = false;
      if (shift > max_shift) {
        nx = ox + sx * (max_shift / shift);
        ny = oy + sy * (max_shift / shift);
        clamped = true;
      }
      const double moved = std::hypot(nx - cx, ny - cy);
      cx = nx;
      cy = ny;
      if (clamped || moved < 1e-4) break;
    }
    kp.x = std::clamp(cx, x_lo, x_hi);
    kp.y = std::clamp(cy, y_lo, y_hi);
  }
}

Descriptor describe(const Image& gray_smoothed, const Keypoint& keypoint,
                    std::uint32_t pattern_seed) {
  if (gray_smoothed.channels != 1 || !gray_smoothed.valid()) {
    throw InvalidValue("describe expects a valid 1-channel image");
  }
  return describe_with_pattern(gray_smoothed, build_pattern(pattern_seed), keypoint);
}

std::vector<Descriptor> describe_all(const Image& gray_smoothed,
                                     const std::vector<Keypoint>& keypoints,
                                     std::uint32_t pattern_seed) {
  if (gray_smoothed.channels != 1 || !gray_smoothed.valid()) {
    throw InvalidValue("describe_all expects a valid 1-channel image");
  }
  const auto pattern = build_pattern(pattern_seed);
  std::vector<Descriptor> out;
  out.reserve(keypoints.size());
  for (const Keypoint& kp : keypoints) {
    out.push_back(describe_with_pattern(gray_smoothed, pattern, kp));
  }
  return out;
}

std::vector<Match> match_descriptors(const std::vector<Descriptor>& set_a,
                                     const std::vector<Descriptor>& set_b,
                                     double ratio, bool cross_check) {
  if (!(ratio > 0.0 && ratio <= 1.0)) {
    throw InvalidValue("match_descriptors: ratio must be in (0, 1]");
  }
  std::vector<Match> matches;
  if (set_a.empty() || set_b.empty()) return matches;

  std::vector<int> best_a_of_b;
  if (cross_check) {
    best_a_of_b.resize(set_b.size());
    for (std::size_t j = 0; j < set_b.size(); ++j) {
      int best = 257;
      int best_i = 0;
      for (std::size_t i = 0; i < set_a.size(); ++i) {
        const int d = hamming_distance(set_a[i], set_b[j]);
        if (d < best) {
          best = d;
          best_i = static_cast<int>(i);
        }
      }
      best_a_of_b[j] = best_i;
    }
  }

  for (std::size_t i = 0; i < set_a.size(); ++i) {
    int best = 257;
    int second = 257;
    int best_j = 0;
    for (std::size_t j = 0; j < set_b.size(); ++j) {
      const int d = hamming_distance(set_a[i], set_b[j]);
      if (d < best) {
        second = best;
        best = d;
        best_j = static_cast<int>(j);
      } else if (d < second) {
        second = d;
      }
    }
    if (set_b.size() >= 2 && !(best < ratio * second)) continue;
    if (cross_check && best_a_of_b[static_cast<std::size_t>(best_j)] !=
                           static_cast<int>(i)) {
      continue;
    }
    matches.push_back({static_cast<int>(i), best_j, best});
  }
  return matches;
}

}  // namespace panosum::features
