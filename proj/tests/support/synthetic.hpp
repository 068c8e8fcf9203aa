#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "panosum/image.hpp"
#include "panosum/pose.hpp"
#include "panosum/rng.hpp"

namespace testsupport {

Eigen::Matrix3d random_rotation(panosum::Rng& rng, double max_angle_rad);
Eigen::Vector3d random_unit_vector(panosum::Rng& rng);

/// Two cameras seeing a common point cloud; camera a is the world frame,
/// camera b is at (R, t) with ||t|| = 1 (x_b = R x_a + t). Image points are
/// pixel coordinates, all strictly inside the image and in front of both
/// cameras.
struct TwoViewScene {
  panosum::io::CameraIntrinsics K;
  int width = 640;
  int height = 480;
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
  Eigen::Vector3d t = Eigen::Vector3d::UnitX();
  std::vector<Eigen::Vector3d> world;  // camera-a frame
  std::vector<Eigen::Vector2d> points_a;
  std::vector<Eigen::Vector2d> points_b;
  std::vector<int> inlier_indices;  // indices untouched by outlier planting
};

TwoViewScene make_two_view_scene(panosum::Rng& rng, int n_points, double noise_px);

/// Replaces a fraction of points_b with displaced positions whose Sampson
/// residual against the true E exceeds min_residual_px, so no planted outlier
/// can sneak under the estimator threshold. inlier_indices shrinks to the
/// untouched set.
void plant_essential_outliers(TwoViewScene& scene, panosum::Rng& rng, double fraction,
                              double min_residual_px);

struct HomographyScene {
  Eigen::Matrix3d H = Eigen::Matrix3d::Identity();  // maps a to b
  std::vector<Eigen::Vector2d> points_a;
  std::vector<Eigen::Vector2d> points_b;
  std::vector<int> inlier_indices;
};

/// Random well-conditioned projective map applied to points spread over a
/// 640x480 window; optional Gaussian pixel noise on both sides.
HomographyScene make_homography_scene(panosum::Rng& rng, int n_points, double noise_px);

void plant_homography_outliers(HomographyScene& scene, panosum::Rng& rng, double fraction,
                               double min_residual_px);

double rotation_error_deg(const Eigen::Matrix3d& a, const Eigen::Matrix3d& b);
double direction_error_deg(const Eigen::Vector3d& a, const Eigen::Vector3d& b);

/// A field of small star-like intensity blobs: each world point renders as a
/// central Gaussian plus a few weaker satellites at fixed screen offsets.
/// The satellites make descriptors distinctive; keeping their offsets in
/// screen space makes each feature's detected position a constant sub-pixel
/// shift of the true projection, so geometric oracles stay valid.
struct AsterismPoint {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  double amplitude = 200.0;
  double sigma = 1.5;
  std::vector<Eigen::Vector2d> satellite_offsets;  // pixels
  std::vector<double> satellite_amplitudes;
  std::vector<double> satellite_sigmas;
};

struct AsterismWorld {
  std::vector<AsterismPoint> points;
};

AsterismWorld make_asterism(panosum::Rng& rng, int n_points, const Eigen::Vector3d& center,
                            const Eigen::Vector3d& half_extent);

/// World-to-camera pose with the camera centered at `eye` looking at
/// `target`, +y down (image convention), z forward.
panosum::vo::Pose look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target,
                          const Eigen::Vector3d& up = Eigen::Vector3d(0, -1, 0));

panosum::io::Image render_asterism(const AsterismWorld& world, const panosum::vo::Pose& pose,
                                   const panosum::io::CameraIntrinsics& K, int width, int height,
                                   int background = 10);

/// True iff every asterism point projects at least `margin` pixels inside the
/// image and in front of the camera.
bool all_points_visible(const AsterismWorld& world, const panosum::vo::Pose& pose,
                        const panosum::io::CameraIntrinsics& K, int width, int height, double margin);

/// Smooth random texture (sum of low-frequency cosine waves), good for
/// resampling-based stitching tests.
panosum::io::Image make_texture(panosum::Rng& rng, int width, int height, int channels);

/// Adds small Gaussian bumps. Gives smooth textures corner detections while
/// staying friendly to bilinear resampling.
void add_corner_blobs(panosum::io::Image& image, panosum::Rng& rng, int count);

/// Bilinear crop of `ref` rotated by `angle_rad` about the crop center.
/// (cx, cy) is the reference-image point that lands on the crop center.
panosum::io::Image crop_rotated(const panosum::io::Image& ref, double cx, double cy, int width,
                                int height, double angle_rad);

double psnr(const std::vector<double>& errors);  // mean squared -> dB, 255 peak

/// Max distance of the points to their best total-least-squares line.
double max_line_residual(const std::vector<Eigen::Vector3d>& points);

void write_frames(const std::vector<panosum::io::Image>& frames, const std::string& dir);
void write_intrinsics(const panosum::io::CameraIntrinsics& K, const std::string& path);

}  // namespace testsupport
