#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "panosum/features.hpp"
#include "panosum/image.hpp"
#include "panosum/pose.hpp"

namespace panosum::vo {

/// Keyframe promotion thresholds: median displacement, tracked fraction,
/// frame-count fallback.
struct KeyframePolicy {
  double tau_d = 12.0;
  double tau_r = 0.6;
  int n_max = 30;
};

struct VoConfig {
  KeyframePolicy keyframe;
  int fast_threshold = 20;
  int max_keypoints = 1200;
  bool subpixel_refine = true;
  double match_ratio = 0.8;
  int min_init_inliers = 50;
  int min_init_map_points = 20;
  double essential_threshold_px = 1.0;
  double pnp_threshold_px = 2.0;
  double max_reprojection_px = 2.0;
  double min_parallax_deg = 1.0;
  int ransac_max_iters = 2000;
  std::uint64_t seed = 0;
};

/// Detection margin: descriptor reach (22) plus subpixel-refinement slack,
/// so every detected keypoint stays describable after refinement.
inline constexpr int kDetectionBorderMargin = 24;

struct Keyframe {
  int id = 0;
  int frame_index = 0;
  std::optional<Pose> pose;  // absent before initialization or after a tracking break
  std::vector<features::Keypoint> keypoints;
  std::vector<features::Descriptor> descriptors;
  std::vector<int> map_point_ids;  // retained map points observed, ascending
};

struct MapPoint {
  int id = 0;
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  std::vector<std::pair<int, int>> observations;  // (keyframe id, keypoint index)
};

struct KeyframeDiagnostics {
  int keyframe_id = 0;
  int frame_index = 0;
  int tracked_matches = 0;  // matches from the previous keyframe at promotion
  int inliers = 0;          // essential inliers at init, PnP inliers after
  bool localized = false;
};

struct VoDiagnostics {
  bool initialized = false;
  int init_keyframe_a = -1;
  int init_keyframe_b = -1;
  int culled_map_points = 0;
  std::vector<KeyframeDiagnostics> per_keyframe;
};

struct VoResult {
  std::vector<Keyframe> keyframes;
  std::vector<MapPoint> map_points;
  VoDiagnostics diagnostics;
};

/// Median keypoint displacement over the given matches; 0 when empty.
double median_displacement(const std::vector<features::Match>& matches,
                           const std::vector<features::Keypoint>& keypoints_a,
                           const std::vector<features::Keypoint>& keypoints_b);

/// True iff median displacement > tau_d, or tracked fraction < tau_r, or
/// frames_since_keyframe >= n_max. The fraction counts matches against the
/// keyframe's keypoints (1.0 when the keyframe has none).
bool keyframe_decision(const std::vector<features::Match>& tracked_matches,
                       const std::vector<features::Keypoint>& keyframe_keypoints,
                       const std::vector<features::Keypoint>& frame_keypoints,
                       int frames_since_keyframe, const KeyframePolicy& policy);

/// Sequential monocular VO: keyframe selection, two-view bootstrap (gauge
/// ||t|| = 1, anchor keyframe at identity), PnP localization against the
/// sparse map, triangulation of new points, reprojection culling.
/// Initialization failure is reported in diagnostics, never thrown; the
/// keyframe list is still produced (poses absent).
VoResult run_vo(const std::vector<io::Frame>& frames,
                const io::CameraIntrinsics& intrinsics, const VoConfig& config);

}  // namespace panosum::vo
