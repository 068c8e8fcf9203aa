// Microbenchmarks for the hot paths: corner detection, description and
// matching, essential-matrix RANSAC, replicator dynamics, homography DLT,
// and multiband blending. Inputs are synthesized once per benchmark.

#include <cstdint>
#include <vector>

#include <benchmark/benchmark.h>
#include <Eigen/Dense>

#include "panosum/blend.hpp"
#include "panosum/dominant_sets.hpp"
#include "panosum/features.hpp"
#include "panosum/homography.hpp"
#include "panosum/image.hpp"
#include "panosum/pose.hpp"
#include "panosum/rng.hpp"
#include "panosum/two_view.hpp"

using namespace panosum;

namespace {

io::Image noise_image(std::uint64_t seed, int w, int h) {
  Rng rng(seed);
  io::Image img(w, h, 1);
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.uniform_index(256));
  return img;
}

void bm_detect_corners(benchmark::State& state) {
  const io::Image img = noise_image(1, 640, 480);
  for (auto _ : state) {
    auto kps = features::detect_corners(img, 20, 1200, 24);
    benchmark::DoNotOptimize(kps);
  }
}
BENCHMARK(bm_detect_corners)->Unit(benchmark::kMillisecond);

void bm_describe_all(benchmark::State& state) {
  const io::Image img = noise_image(2, 640, 480);
  const io::Image smoothed = io::gaussian_smooth(img);
  const auto kps = features::detect_corners(img, 20, 1200, 24);
  for (auto _ : state) {
    auto descs = features::describe_all(smoothed, kps);
    benchmark::DoNotOptimize(descs);
  }
}
BENCHMARK(bm_describe_all)->Unit(benchmark::kMillisecond);

void bm_match_descriptors(benchmark::State& state) {
  const io::Image img_a = noise_image(3, 640, 480);
  const io::Image img_b = noise_image(4, 640, 480);
  const auto kps_a = features::detect_corners(img_a, 20, 1200, 24);
  const auto kps_b = features::detect_corners(img_b, 20, 1200, 24);
  const auto descs_a = features::describe_all(io::gaussian_smooth(img_a), kps_a);
  const auto descs_b = features::describe_all(io::gaussian_smooth(img_b), kps_b);
  for (auto _ : state) {
    auto matches = features::match_descriptors(descs_a, descs_b);
    benchmark::DoNotOptimize(matches);
  }
}
BENCHMARK(bm_match_descriptors)->Unit(benchmark::kMillisecond);

void bm_essential_ransac(benchmark::State& state) {
  Rng rng(5);
  const io::CameraIntrinsics k{500, 500, 320, 240};
  const Eigen::Matrix3d r = vo::rodrigues(Eigen::Vector3d(0.05, -0.2, 0.04));
  const Eigen::Vector3d t = Eigen::Vector3d(1.0, 0.1, 0.05).normalized();
  std::vector<Eigen::Vector2d> pts_a, pts_b;
  while (pts_a.size() < 200) {
    const Eigen::Vector3d x(rng.uniform_double(-3, 3), rng.uniform_double(-2, 2),
                            rng.uniform_double(4, 10));
    const Eigen::Vector3d xb = r * x + t;
    if (xb.z() <= 0.1) continue;
    const Eigen::Vector2d pa(k.fx * x.x() / x.z() + k.cx, k.fy * x.y() / x.z() + k.cy);
    const Eigen::Vector2d pb(k.fx * xb.x() / xb.z() + k.cx, k.fy * xb.y() / xb.z() + k.cy);
    if (pa.x() < 0 || pa.x() >= 640 || pa.y() < 0 || pa.y() >= 480) continue;
    if (pb.x() < 0 || pb.x() >= 640 || pb.y() < 0 || pb.y() >= 480) continue;
    pts_a.push_back(pa);
    pts_b.push_back(pb);
  }
  // 30% gross outliers
  for (std::size_t i = 0; i < pts_b.size(); i += 3) {
    pts_b[i] += Eigen::Vector2d(rng.uniform_double(30, 80), rng.uniform_double(30, 80));
  }
  for (auto _ : state) {
    auto res = vo::estimate_essential_ransac(pts_a, pts_b, k, 1.0, 2000, 0);
    benchmark::DoNotOptimize(res);
  }
}
BENCHMARK(bm_essential_ransac)->Unit(benchmark::kMillisecond);

void bm_replicator_dynamics(benchmark::State& state) {
  Rng rng(6);
  const int n = 64;
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const bool within = (i < n / 2) == (j < n / 2);
      a(i, j) = a(j, i) = within ? rng.uniform_double(0.8, 1.0) : rng.uniform_double(0.0, 0.2);
    }
  }
  const Eigen::VectorXd x0 = Eigen::VectorXd::Constant(n, 1.0 / n);
  for (auto _ : state) {
    auto res = cluster::replicator_dynamics(a, x0, 1e-8, 10000);
    benchmark::DoNotOptimize(res);
  }
}
BENCHMARK(bm_replicator_dynamics);

void bm_homography_dlt(benchmark::State& state) {
  Rng rng(7);
  Eigen::Matrix3d h;
  h << 1.05, 0.02, 12.0, -0.03, 0.97, -8.0, 1e-5, -2e-5, 1.0;
  std::vector<Eigen::Vector2d> src, dst;
  for (int i = 0; i < 100; ++i) {
    const Eigen::Vector2d p(rng.uniform_double(0, 640), rng.uniform_double(0, 480));
    src.push_back(p);
    dst.push_back(stitch::apply_homography(h, p));
  }
  for (auto _ : state) {
    auto est = stitch::estimate_homography_dlt(src, dst);
    benchmark::DoNotOptimize(est);
  }
}
BENCHMARK(bm_homography_dlt);

void bm_multiband_blend(benchmark::State& state) {
  const int w = 512, h = 384;
  Rng rng(8);
  stitch::ImageF layer_a(w, h, 3), layer_b(w, h, 3);
  for (auto& v : layer_a.data) v = static_cast<float>(rng.uniform_double(0, 255));
  for (auto& v : layer_b.data) v = static_cast<float>(rng.uniform_double(0, 255));
  std::vector<float> wa(static_cast<std::size_t>(w) * h), wb(wa.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const float u = static_cast<float>(x) / (w - 1);
      wa[static_cast<std::size_t>(y) * w + x] = 1.0f - u;
      wb[static_cast<std::size_t>(y) * w + x] = u;
    }
  }
  const std::vector<stitch::ImageF> layers = {layer_a, layer_b};
  const std::vector<std::vector<float>> weights = {wa, wb};
  for (auto _ : state) {
    auto out = stitch::multiband_blend(layers, weights, 4);
    benchmark::DoNotOptimize(out);
  }
}
BENCHMARK(bm_multiband_blend)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
