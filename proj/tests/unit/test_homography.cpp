#include <algorithm>
#include <cmath>
#include <vector>

#include <doctest.h>
#include <Eigen/Dense>

#include "panosum/errors.hpp"
#include "panosum/homography.hpp"
#include "panosum/rng.hpp"
#include "synthetic.hpp"

using namespace panosum;

namespace {

struct MatchedScene {
  std::vector<features::Match> matches;
  std::vector<features::Keypoint> kps_a;
  std::vector<features::Keypoint> kps_b;
};

MatchedScene as_matches(const testsupport::HomographyScene& scene) {
  MatchedScene out;
  for (std::size_t i = 0; i < scene.points_a.size(); ++i) {
    features::Keypoint ka;
    ka.x = scene.points_a[i].x();
    ka.y = scene.points_a[i].y();
    features::Keypoint kb;
    kb.x = scene.points_b[i].x();
    kb.y = scene.points_b[i].y();
    out.kps_a.push_back(ka);
    out.kps_b.push_back(kb);
    out.matches.push_back({static_cast<int>(i), static_cast<int>(i), 0});
  }
  return out;
}

double max_transfer_error(const Eigen::Matrix3d& h,
                          const testsupport::HomographyScene& scene) {
  double worst = 0;
  for (int i : scene.inlier_indices) {
    worst = std::max(worst, stitch::symmetric_transfer_error(
                                h, scene.points_a[static_cast<std::size_t>(i)],
                                scene.points_b[static_cast<std::size_t>(i)]));
  }
  return worst;
}

}  // namespace

TEST_SUITE("homography") {

TEST_CASE("apply_homography") {
  CHECK((stitch::apply_homography(Eigen::Matrix3d::Identity(), {3.5, -2.0}) -
         Eigen::Vector2d(3.5, -2.0))
            .norm() == 0);

  Eigen::Matrix3d h;
  h << 2, 0, 1, 0, 3, -4, 0, 0, 1;
  CHECK((stitch::apply_homography(h, {1, 1}) - Eigen::Vector2d(3, -1)).norm() == 0);

  // Projective division: w = 0.5 at this point.
  Eigen::Matrix3d p = Eigen::Matrix3d::Identity();
  p(2, 0) = -0.25;
  CHECK((stitch::apply_homography(p, {2, 6}) - Eigen::Vector2d(4, 12)).norm() < 1e-12);
}

TEST_CASE("normalized fixes the gauge") {
  Eigen::Matrix3d h;
  h << 2, 0, 8, 0, 2, -6, 0, 0, 2;
  const Eigen::Matrix3d n = stitch::normalized(h).H;
  CHECK(n(2, 2) == 1.0);
  CHECK(n(0, 0) == doctest::Approx(1.0).epsilon(1e-15));

  Rng rng(90);
  for (int i = 0; i < 10; ++i) {
    Eigen::Matrix3d r = Eigen::Matrix3d::Identity();
    for (int k = 0; k < 9; ++k) r(k / 3, k % 3) += 0.3 * rng.normal();
    if (std::abs(r.determinant()) < 1e-6) continue;
    const Eigen::Matrix3d base = stitch::normalized(r).H;
    for (const double scale : {0.02, -5.7}) {
      const Eigen::Matrix3d again = stitch::normalized(Eigen::Matrix3d(scale * r)).H;
      CHECK((again - base).norm() < 1e-9 * base.norm());
    }
  }

  CHECK_THROWS_AS(stitch::normalized(Eigen::Matrix3d::Zero()), DegenerateConfiguration);
  Eigen::Matrix3d singular = Eigen::Matrix3d::Identity();
  singular(1, 1) = 0;
  CHECK_THROWS_AS(stitch::normalized(singular), DegenerateConfiguration);
  Eigen::Matrix3d bad = Eigen::Matrix3d::Identity();
  bad(0, 1) = std::nan("");
  CHECK_THROWS_AS(stitch::normalized(bad), DegenerateConfiguration);
}

TEST_CASE("symmetric_transfer_error") {
  CHECK(stitch::symmetric_transfer_error(Eigen::Matrix3d::Identity(), {7, 9}, {7, 9}) == 0);

  Eigen::Matrix3d shift = Eigen::Matrix3d::Identity();
  shift(0, 2) = 10;
  // Forward residual (10,0)-(3,4), backward residual (-7,4)-(0,0).
  CHECK(stitch::symmetric_transfer_error(shift, {0, 0}, {3, 4}) ==
        doctest::Approx(2.0 * std::sqrt(65.0)).epsilon(1e-12));

  Rng rng(91);
  for (int i = 0; i < 20; ++i) {
    Eigen::Matrix3d h = Eigen::Matrix3d::Identity();
    for (int k = 0; k < 9; ++k) h(k / 3, k % 3) += 0.2 * rng.normal();
    if (std::abs(h.determinant()) < 1e-3) continue;
    const Eigen::Vector2d a(rng.uniform_double(-50, 50), rng.uniform_double(-50, 50));
    const Eigen::Vector2d b(rng.uniform_double(-50, 50), rng.uniform_double(-50, 50));
    const double fwd = stitch::symmetric_transfer_error(h, a, b);
    const double bwd = stitch::symmetric_transfer_error(h.inverse(), b, a);
    CHECK(fwd == doctest::Approx(bwd).epsilon(1e-9));
  }
}

TEST_CASE("estimate_homography_dlt exact recovery") {
  SUBCASE("identity from four corners") {
    const std::vector<Eigen::Vector2d> pts = {{0, 0}, {640, 0}, {640, 480}, {0, 480}};
    const Eigen::Matrix3d h = stitch::estimate_homography_dlt(pts, pts).H;
    CHECK((h - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("translation") {
    std::vector<Eigen::Vector2d> src = {{0, 0}, {100, 10}, {30, 200}, {250, 250}, {90, 120}, {5, 77}};
    std::vector<Eigen::Vector2d> dst;
    for (const auto& p : src) dst.push_back(p + Eigen::Vector2d(10, -5));
    const Eigen::Matrix3d h = stitch::estimate_homography_dlt(src, dst).H;
    Eigen::Matrix3d expect = Eigen::Matrix3d::Identity();
    expect(0, 2) = 10;
    expect(1, 2) = -5;
    CHECK((h - expect).cwiseAbs().maxCoeff() < 1e-9);
  }
  SUBCASE("random projective maps") {
    Rng rng(92);
    for (int trial = 0; trial < 10; ++trial) {
      const auto scene = testsupport::make_homography_scene(rng, 8, 0.0);
      const Eigen::Matrix3d h =
          stitch::estimate_homography_dlt(scene.points_a, scene.points_b).H;
      CHECK(max_transfer_error(h, scene) < 1e-7);
    }
  }
}

TEST_CASE("estimate_homography_dlt rejects bad input") {
  const std::vector<Eigen::Vector2d> collinear = {{0, 0}, {1, 1}, {2, 2}, {3, 3}};
  const std::vector<Eigen::Vector2d> square = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  CHECK_THROWS_AS(stitch::estimate_homography_dlt(collinear, square), DegenerateConfiguration);

  // Coincident source points leave only three distinct constraints.
  const std::vector<Eigen::Vector2d> coincident = {{0, 0}, {0, 0}, {1, 1}, {2, 0}};
  CHECK_THROWS_AS(stitch::estimate_homography_dlt(coincident, square), DegenerateConfiguration);

  CHECK_THROWS_AS(stitch::estimate_homography_dlt({{0, 0}, {1, 0}, {0, 1}}, {{0, 0}, {1, 0}, {0, 1}}),
                  InsufficientMatches);
  const std::vector<Eigen::Vector2d> one = {{0, 0}};
  CHECK_THROWS_AS(stitch::estimate_homography_dlt(square, one), InvalidValue);
}

TEST_CASE("estimate_homography_ransac noiseless") {
  Rng rng(93);
  for (int trial = 0; trial < 5; ++trial) {
    const auto scene = testsupport::make_homography_scene(rng, 40, 0.0);
    const auto ms = as_matches(scene);
    const auto res = stitch::estimate_homography_ransac(ms.matches, ms.kps_a, ms.kps_b);
    CHECK(res.inliers.size() == scene.points_a.size());
    CHECK(max_transfer_error(res.h.H, scene) < 1e-6);
  }
}

TEST_CASE("estimate_homography_ransac isolates planted outliers") {
  Rng rng(94);
  for (int trial = 0; trial < 5; ++trial) {
    auto scene = testsupport::make_homography_scene(rng, 60, 0.0);
    testsupport::plant_homography_outliers(scene, rng, 0.3, 18.0);
    const auto ms = as_matches(scene);
    const auto res = stitch::estimate_homography_ransac(ms.matches, ms.kps_a, ms.kps_b, 3.0,
                                                        2000, 7 + static_cast<std::uint64_t>(trial));
    std::vector<int> got = res.inliers;
    std::sort(got.begin(), got.end());
    std::vector<int> expect = scene.inlier_indices;
    std::sort(expect.begin(), expect.end());
    CHECK(got == expect);
  }
}

TEST_CASE("estimate_homography_ransac errors and determinism") {
  Rng rng(95);
  const auto scene = testsupport::make_homography_scene(rng, 30, 0.0);
  const auto ms = as_matches(scene);

  const std::vector<features::Match> three(ms.matches.begin(), ms.matches.begin() + 3);
  CHECK_THROWS_AS(stitch::estimate_homography_ransac(three, ms.kps_a, ms.kps_b),
                  InsufficientMatches);

  const auto r1 = stitch::estimate_homography_ransac(ms.matches, ms.kps_a, ms.kps_b, 3.0, 2000, 5);
  const auto r2 = stitch::estimate_homography_ransac(ms.matches, ms.kps_a, ms.kps_b, 3.0, 2000, 5);
  CHECK((r1.h.H - r2.h.H).norm() == 0);
  CHECK(r1.inliers == r2.inliers);
}

}  // TEST_SUITE
