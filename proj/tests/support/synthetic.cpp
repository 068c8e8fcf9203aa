#include "synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include <Eigen/Dense>

#include "panosum/image_io.hpp"
#include "panosum/report.hpp"
#include "panosum/two_view.hpp"

namespace testsupport {

using panosum::Rng;
using panosum::io::CameraIntrinsics;
using panosum::io::Image;
using panosum::vo::Pose;

Eigen::Vector3d random_unit_vector(Rng& rng) {
  while (true) {
    Eigen::Vector3d v(rng.uniform_double(-1, 1), rng.uniform_double(-1, 1), rng.uniform_double(-1, 1));
    const double n = v.norm();
    if (n > 1e-3 && n <= 1.0) return v / n;
  }
}

Eigen::Matrix3d random_rotation(Rng& rng, double max_angle_rad) {
  const Eigen::Vector3d axis = random_unit_vector(rng);
  const double angle = rng.uniform_double(0, max_angle_rad);
  return panosum::vo::rodrigues(axis * angle);
}

double rotation_error_deg(const Eigen::Matrix3d& a, const Eigen::Matrix3d& b) {
  return panosum::vo::rotation_angle_between(a, b) * 180.0 / std::numbers::pi;
}

double direction_error_deg(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  const double c = std::clamp(a.normalized().dot(b.normalized()), -1.0, 1.0);
  return std::acos(c) * 180.0 / std::numbers::pi;
}

namespace {

Eigen::Vector2d project_pixel(const CameraIntrinsics& K, const Eigen::Vector3d& p) {
  return {K.fx * p.x() / p.z() + K.cx, K.fy * p.y() / p.z() + K.cy};
}

bool inside(const Eigen::Vector2d& p, int w, int h, double margin) {
  return p.x() >= margin && p.y() >= margin && p.x() <= w - 1 - margin && p.y() <= h - 1 - margin;
}

}  // namespace

TwoViewScene make_two_view_scene(Rng& rng, int n_points, double noise_px) {
  TwoViewScene scene;
  scene.K.fx = rng.uniform_double(450, 650);
  scene.K.fy = rng.uniform_double(450, 650);
  scene.K.cx = 320 + rng.uniform_double(-10, 10);
  scene.K.cy = 240 + rng.uniform_double(-10, 10);
  scene.R = random_rotation(rng, 15.0 * std::numbers::pi / 180.0);
  scene.t = random_unit_vector(rng);

  const double margin = 20.0;
  for (int i = 0; i < n_points; ++i) {
    for (int attempt = 0;; ++attempt) {
      if (attempt > 2000) throw std::runtime_error("two-view scene sampling stalled");
      const double u = rng.uniform_double(margin, scene.width - 1 - margin);
      const double v = rng.uniform_double(margin, scene.height - 1 - margin);
      const double z = rng.uniform_double(4.0, 10.0);
      const Eigen::Vector3d p_a((u - scene.K.cx) / scene.K.fx * z, (v - scene.K.cy) / scene.K.fy * z, z);
      const Eigen::Vector3d p_b = scene.R * p_a + scene.t;
      if (p_b.z() < 0.5) continue;
      const Eigen::Vector2d px_b = project_pixel(scene.K, p_b);
      if (!inside(px_b, scene.width, scene.height, margin)) continue;
      scene.world.push_back(p_a);
      scene.points_a.emplace_back(u, v);
      scene.points_b.push_back(px_b);
      break;
    }
  }
  if (noise_px > 0) {
    for (int i = 0; i < n_points; ++i) {
      scene.points_a[i] += Eigen::Vector2d(rng.normal(), rng.normal()) * noise_px;
      scene.points_b[i] += Eigen::Vector2d(rng.normal(), rng.normal()) * noise_px;
    }
  }
  scene.inlier_indices.resize(n_points);
  for (int i = 0; i < n_points; ++i) scene.inlier_indices[i] = i;
  return scene;
}

namespace {

Eigen::Matrix3d essential_of(const TwoViewScene& scene) {
  Eigen::Matrix3d tx;
  tx << 0, -scene.t.z(), scene.t.y(), scene.t.z(), 0, -scene.t.x(), -scene.t.y(), scene.t.x(), 0;
  return tx * scene.R;
}

Eigen::Vector2d normalized_point(const CameraIntrinsics& K, const Eigen::Vector2d& px) {
  return {(px.x() - K.cx) / K.fx, (px.y() - K.cy) / K.fy};
}

}  // namespace

void plant_essential_outliers(TwoViewScene& scene, Rng& rng, double fraction, double min_residual_px) {
  const int n = static_cast<int>(scene.points_a.size());
  const int n_out = static_cast<int>(std::ceil(fraction * n));
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  for (int i = n - 1; i > 0; --i) std::swap(order[i], order[rng.uniform_index(i + 1)]);

  const Eigen::Matrix3d E = essential_of(scene);
  const double focal = (scene.K.fx + scene.K.fy) / 2.0;
  std::vector<int> inliers;
  for (int k = 0; k < n; ++k) {
    const int i = order[k];
    if (k >= n_out) {
      inliers.push_back(i);
      continue;
    }
    for (int attempt = 0;; ++attempt) {
      if (attempt > 5000) throw std::runtime_error("outlier planting stalled");
      const Eigen::Vector2d candidate(rng.uniform_double(20, scene.width - 21),
                                      rng.uniform_double(20, scene.height - 21));
      const double d = panosum::vo::sampson_distance(E, normalized_point(scene.K, scene.points_a[i]),
                                                     normalized_point(scene.K, candidate)) *
                       focal;
      if (d > min_residual_px) {
        scene.points_b[i] = candidate;
        break;
      }
    }
  }
  std::sort(inliers.begin(), inliers.end());
  scene.inlier_indices = inliers;
}

HomographyScene make_homography_scene(Rng& rng, int n_points, double noise_px) {
  HomographyScene scene;
  const double angle = rng.uniform_double(-0.5, 0.5);
  const double s = rng.uniform_double(0.8, 1.25);
  Eigen::Matrix3d H;
  H << s * std::cos(angle), -s * std::sin(angle), rng.uniform_double(-40, 40),
      s * std::sin(angle), s * std::cos(angle), rng.uniform_double(-40, 40),
      rng.uniform_double(-1.5e-4, 1.5e-4), rng.uniform_double(-1.5e-4, 1.5e-4), 1.0;
  scene.H = H;
  for (int i = 0; i < n_points; ++i) {
    const Eigen::Vector3d a(rng.uniform_double(20, 620), rng.uniform_double(20, 460), 1.0);
    Eigen::Vector3d b = H * a;
    b /= b.z();
    scene.points_a.emplace_back(a.x(), a.y());
    scene.points_b.emplace_back(b.x(), b.y());
  }
  if (noise_px > 0) {
    for (int i = 0; i < n_points; ++i) {
      scene.points_a[i] += Eigen::Vector2d(rng.normal(), rng.normal()) * noise_px;
      scene.points_b[i] += Eigen::Vector2d(rng.normal(), rng.normal()) * noise_px;
    }
  }
  scene.inlier_indices.resize(n_points);
  for (int i = 0; i < n_points; ++i) scene.inlier_indices[i] = i;
  return scene;
}

void plant_homography_outliers(HomographyScene& scene, Rng& rng, double fraction,
                               double min_residual_px) {
  const int n = static_cast<int>(scene.points_a.size());
  const int n_out = static_cast<int>(std::ceil(fraction * n));
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  for (int i = n - 1; i > 0; --i) std::swap(order[i], order[rng.uniform_index(i + 1)]);

  const Eigen::Matrix3d H_inv = scene.H.inverse();
  std::vector<int> inliers;
  for (int k = 0; k < n; ++k) {
    const int i = order[k];
    if (k >= n_out) {
      inliers.push_back(i);
      continue;
    }
    const Eigen::Vector3d a(scene.points_a[i].x(), scene.points_a[i].y(), 1.0);
    Eigen::Vector3d fwd = scene.H * a;
    fwd /= fwd.z();
    for (int attempt = 0;; ++attempt) {
      if (attempt > 5000) throw std::runtime_error("outlier planting stalled");
      const Eigen::Vector2d candidate(rng.uniform_double(0, 640), rng.uniform_double(0, 480));
      const double forward = (candidate - Eigen::Vector2d(fwd.x(), fwd.y())).norm();
      Eigen::Vector3d back = H_inv * Eigen::Vector3d(candidate.x(), candidate.y(), 1.0);
      if (std::abs(back.z()) < 1e-9) continue;
      back /= back.z();
      const double backward = (Eigen::Vector2d(back.x(), back.y()) - scene.points_a[i]).norm();
      if (forward + backward > min_residual_px) {
        scene.points_b[i] = candidate;
        break;
      }
    }
  }
  std::sort(inliers.begin(), inliers.end());
  scene.inlier_indices = inliers;
}

AsterismWorld make_asterism(Rng& rng, int n_points, const Eigen::Vector3d& center,
                            const Eigen::Vector3d& half_extent) {
  AsterismWorld world;
  for (int i = 0; i < n_points; ++i) {
    AsterismPoint p;
    p.position = center + Eigen::Vector3d(rng.uniform_double(-1, 1) * half_extent.x(),
                                          rng.uniform_double(-1, 1) * half_extent.y(),
                                          rng.uniform_double(-1, 1) * half_extent.z());
    p.amplitude = rng.uniform_double(150, 220);
    p.sigma = rng.uniform_double(1.2, 1.8);
    const int n_sat = 2 + static_cast<int>(rng.uniform_index(3));
    for (int s = 0; s < n_sat; ++s) {
      const double r = rng.uniform_double(3.5, 6.5);
      const double a = rng.uniform_double(0, 2 * std::numbers::pi);
      p.satellite_offsets.emplace_back(r * std::cos(a), r * std::sin(a));
      p.satellite_amplitudes.push_back(rng.uniform_double(60, 120));
      p.satellite_sigmas.push_back(rng.uniform_double(0.9, 1.3));
    }
    world.points.push_back(std::move(p));
  }
  return world;
}

Pose look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target, const Eigen::Vector3d& up) {
  const Eigen::Vector3d z = (target - eye).normalized();
  Eigen::Vector3d y = up - up.dot(z) * z;
  if (y.norm() < 1e-6) y = Eigen::Vector3d(1, 0, 0) - z.x() * z;
  y.normalize();
  const Eigen::Vector3d x = y.cross(z);
  Pose pose;
  pose.R.row(0) = x.transpose();
  pose.R.row(1) = y.transpose();
  pose.R.row(2) = z.transpose();
  pose.t = -pose.R * eye;
  return pose;
}

namespace {

void splat(std::vector<double>& buf, int w, int h, double cu, double cv, double amplitude,
           double sigma) {
  const double reach = 4.0 * sigma;
  const int x0 = std::max(0, static_cast<int>(std::floor(cu - reach)));
  const int x1 = std::min(w - 1, static_cast<int>(std::ceil(cu + reach)));
  const int y0 = std::max(0, static_cast<int>(std::floor(cv - reach)));
  const int y1 = std::min(h - 1, static_cast<int>(std::ceil(cv + reach)));
  const double inv = 1.0 / (2.0 * sigma * sigma);
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      const double d2 = (x - cu) * (x - cu) + (y - cv) * (y - cv);
      buf[static_cast<std::size_t>(y) * w + x] += amplitude * std::exp(-d2 * inv);
    }
}

}  // namespace

Image render_asterism(const AsterismWorld& world, const Pose& pose, const CameraIntrinsics& K,
                      int width, int height, int background) {
  std::vector<double> buf(static_cast<std::size_t>(width) * height, static_cast<double>(background));
  for (const auto& point : world.points) {
    const Eigen::Vector3d p = pose.R * point.position + pose.t;
    if (p.z() < 0.25) continue;
    const Eigen::Vector2d c = project_pixel(K, p);
    if (c.x() < -30 || c.y() < -30 || c.x() > width + 29 || c.y() > height + 29) continue;
    splat(buf, width, height, c.x(), c.y(), point.amplitude, point.sigma);
    for (std::size_t s = 0; s < point.satellite_offsets.size(); ++s)
      splat(buf, width, height, c.x() + point.satellite_offsets[s].x(),
            c.y() + point.satellite_offsets[s].y(), point.satellite_amplitudes[s],
            point.satellite_sigmas[s]);
  }
  Image image(width, height, 1);
  for (std::size_t i = 0; i < buf.size(); ++i)
    image.pixels[i] = static_cast<std::uint8_t>(std::lround(std::clamp(buf[i], 0.0, 255.0)));
  return image;
}

bool all_points_visible(const AsterismWorld& world, const Pose& pose, const CameraIntrinsics& K,
                        int width, int height, double margin) {
  for (const auto& point : world.points) {
    const Eigen::Vector3d p = pose.R * point.position + pose.t;
    if (p.z() < 0.5) return false;
    if (!inside(project_pixel(K, p), width, height, margin)) return false;
  }
  return true;
}

Image make_texture(Rng& rng, int width, int height, int channels) {
  std::vector<double> base(static_cast<std::size_t>(width) * height, 0.0);
  const int waves = 30;
  for (int k = 0; k < waves; ++k) {
    const double freq = rng.uniform_double(1.0 / 300.0, 1.0 / 40.0);
    const double theta = rng.uniform_double(0, 2 * std::numbers::pi);
    const double phase = rng.uniform_double(0, 2 * std::numbers::pi);
    const double amp = rng.uniform_double(0.3, 1.0) / (1.0 + 20.0 * freq);
    const double fx = freq * std::cos(theta);
    const double fy = freq * std::sin(theta);
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x)
        base[static_cast<std::size_t>(y) * width + x] +=
            amp * std::cos(2 * std::numbers::pi * (fx * x + fy * y) + phase);
  }
  double lo = base[0], hi = base[0];
  for (double v : base) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const double span = (hi - lo > 1e-12) ? hi - lo : 1.0;

  Image image(width, height, channels);
  // Channel tints keep the texture colorful without reshaping its features.
  const double tint[3][2] = {{30, 225}, {45, 210}, {60, 235}};
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const double v = (base[static_cast<std::size_t>(y) * width + x] - lo) / span;
      for (int c = 0; c < channels; ++c) {
        const double out = tint[c][0] + v * (tint[c][1] - tint[c][0]);
        image.at(x, y, c) = static_cast<std::uint8_t>(std::lround(out));
      }
    }
  return image;
}

void add_corner_blobs(Image& image, Rng& rng, int count) {
  for (int k = 0; k < count; ++k) {
    const double bx = rng.uniform_double(8, image.width - 9);
    const double by = rng.uniform_double(8, image.height - 9);
    const double sigma = rng.uniform_double(1.6, 2.8);
    const double amp = (rng.uniform_index(2) ? 1.0 : -1.0) * rng.uniform_double(50, 95);
    const int r = static_cast<int>(std::ceil(3 * sigma));
    const int cx = static_cast<int>(bx);
    const int cy = static_cast<int>(by);
    for (int y = std::max(0, cy - r); y <= std::min(image.height - 1, cy + r); ++y) {
      for (int x = std::max(0, cx - r); x <= std::min(image.width - 1, cx + r); ++x) {
        const double d2 = (x - bx) * (x - bx) + (y - by) * (y - by);
        const double v = amp * std::exp(-d2 / (2 * sigma * sigma));
        for (int c = 0; c < image.channels; ++c) {
          image.at(x, y, c) = static_cast<std::uint8_t>(
              std::clamp(std::lround(image.at(x, y, c) + v), 0l, 255l));
        }
      }
    }
  }
}

Image crop_rotated(const Image& ref, double cx, double cy, int width, int height, double angle_rad) {
  Image out(width, height, ref.channels);
  const double ca = std::cos(angle_rad);
  const double sa = std::sin(angle_rad);
  const double hx = (width - 1) / 2.0;
  const double hy = (height - 1) / 2.0;
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const double dx = x - hx;
      const double dy = y - hy;
      const double sx = cx + ca * dx - sa * dy;
      const double sy = cy + sa * dx + ca * dy;
      const int x0 = static_cast<int>(std::floor(sx));
      const int y0 = static_cast<int>(std::floor(sy));
      if (x0 < 0 || y0 < 0 || x0 + 1 >= ref.width || y0 + 1 >= ref.height)
        throw std::runtime_error("crop_rotated: window leaves the reference image");
      const double fx = sx - x0;
      const double fy = sy - y0;
      for (int c = 0; c < ref.channels; ++c) {
        const double top = ref.at(x0, y0, c) * (1 - fx) + ref.at(x0 + 1, y0, c) * fx;
        const double bot = ref.at(x0, y0 + 1, c) * (1 - fx) + ref.at(x0 + 1, y0 + 1, c) * fx;
        out.at(x, y, c) = static_cast<std::uint8_t>(std::lround(top * (1 - fy) + bot * fy));
      }
    }
  return out;
}

double psnr(const std::vector<double>& errors) {
  if (errors.empty()) return 0.0;
  double mse = 0.0;
  for (double e : errors) mse += e * e;
  mse /= static_cast<double>(errors.size());
  if (mse <= 1e-12) return 99.0;
  return 10.0 * std::log10(255.0 * 255.0 / mse);
}

double max_line_residual(const std::vector<Eigen::Vector3d>& points) {
  if (points.size() < 2) return 0.0;
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (const auto& p : points) mean += p;
  mean /= static_cast<double>(points.size());
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& p : points) {
    const Eigen::Vector3d d = p - mean;
    cov += d * d.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
  const Eigen::Vector3d dir = eig.eigenvectors().col(2);
  double worst = 0.0;
  for (const auto& p : points) {
    const Eigen::Vector3d d = p - mean;
    worst = std::max(worst, (d - d.dot(dir) * dir).norm());
  }
  return worst;
}

void write_frames(const std::vector<Image>& frames, const std::string& dir) {
  char name[32];
  for (std::size_t i = 0; i < frames.size(); ++i) {
    std::snprintf(name, sizeof(name), "frame_%04zu.png", i);
    panosum::io::write_image_file(dir + "/" + name, frames[i], panosum::io::ImageFormat::PNG);
  }
}

void write_intrinsics(const CameraIntrinsics& K, const std::string& path) {
  panosum::report::Json j = panosum::report::Json::object();
  j["fx"] = panosum::report::Json::number(K.fx);
  j["fy"] = panosum::report::Json::number(K.fy);
  j["cx"] = panosum::report::Json::number(K.cx);
  j["cy"] = panosum::report::Json::number(K.cy);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write intrinsics: " + path);
  out << j.dump();
}

}  // namespace testsupport
