#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace panosum::vo {

/// Rigid camera pose, convention x_cam = R * x_world + t.
/// Monocular units: translations are dimensionless (gauge fixed at init).
struct Pose {
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
  Eigen::Vector3d t = Eigen::Vector3d::Zero();

  Eigen::Vector3d center() const { return -R.transpose() * t; }

  /// Composition: (a * b) maps world through b, then through a.
  Pose operator*(const Pose& b) const { return {R * b.R, R * b.t + t}; }

  Pose inverse() const { return {R.transpose(), -(R.transpose() * t)}; }
};

Eigen::Matrix3d skew(const Eigen::Vector3d& v);

/// Rodrigues exponential of an axis-angle vector. Taylor guards keep it
/// smooth through the identity.
Eigen::Matrix3d rodrigues(const Eigen::Vector3d& axis_angle);

/// Nearest rotation in Frobenius norm (SVD projection, det forced to +1).
Eigen::Matrix3d orthonormalize(const Eigen::Matrix3d& m);

/// Rotation angle in [0, pi].
double rotation_angle(const Eigen::Matrix3d& R);

/// Angle of Ra^T * Rb, i.e. the geodesic distance between two rotations.
double rotation_angle_between(const Eigen::Matrix3d& a, const Eigen::Matrix3d& b);

/// Unit quaternion as (w, x, y, z) with w >= 0 so the double cover cannot
/// produce two encodings of one rotation.
Eigen::Vector4d to_quaternion_wxyz(const Eigen::Matrix3d& R);

}  // namespace panosum::vo
