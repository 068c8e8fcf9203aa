#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <vector>

#include <doctest.h>

#include "panosum/errors.hpp"
#include "panosum/features.hpp"
#include "panosum/image.hpp"
#include "panosum/rng.hpp"
#include "synthetic.hpp"

using namespace panosum;
using features::Descriptor;
using features::Keypoint;
using features::Match;

namespace {

io::Image solid(int w, int h, std::uint8_t v) {
  io::Image img(w, h, 1);
  std::fill(img.pixels.begin(), img.pixels.end(), v);
  return img;
}

io::Image noise_image(Rng& rng, int w, int h) {
  io::Image img = solid(w, h, 0);
  for (auto& px : img.pixels) px = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
  return img;
}

constexpr int kRing[16][2] = {
    {0, -3}, {1, -3}, {2, -2},  {3, -1},  {3, 0},   {3, 1},   {2, 2},  {1, 3},
    {0, 3},  {-1, 3}, {-2, 2},  {-3, 1},  {-3, 0},  {-3, -1}, {-2, -2}, {-1, -3}};

// Independent segment-test oracle: longest circular run of one polarity,
// found by a doubled scan, scored by arc SAD. Mirrors the published FAST-9
// definition rather than the implementation under test.
bool oracle_fast9(const io::Image& gray, int x, int y, int threshold, double* score_out) {
  const int c = gray.at(x, y);
  int classify[16];
  for (int k = 0; k < 16; ++k) {
    const int v = gray.at(x + kRing[k][0], y + kRing[k][1]);
    classify[k] = v > c + threshold ? 1 : (v < c - threshold ? -1 : 0);
  }
  for (const int polarity : {1, -1}) {
    int best_len = 0;
    int best_start = 0;
    int len = 0;
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
    best_len = std::min(best_len, 16);
    if (best_len < 9) continue;
    double score = 0;
    for (int k = 0; k < best_len; ++k) {
      const int idx = (best_start + k) & 15;
      score += std::abs(gray.at(x + kRing[idx][0], y + kRing[idx][1]) - c);
    }
    if (score_out) *score_out = score;
    return true;
  }
  return false;
}

Descriptor random_descriptor(Rng& rng) {
  Descriptor d;
  for (auto& word : d.bits) word = rng.next_u64();
  return d;
}

Descriptor flip_bits(Descriptor d, Rng& rng, int count) {
  std::set<int> positions;
  while (static_cast<int>(positions.size()) < count) {
    positions.insert(static_cast<int>(rng.uniform_index(256)));
  }
  for (int p : positions) d.bits[static_cast<std::size_t>(p >> 6)] ^= std::uint64_t{1} << (p & 63);
  return d;
}

}  // namespace

TEST_SUITE("features") {

TEST_CASE("detect_corners trivial images") {
  CHECK(features::detect_corners(solid(32, 32, 128), 20, 100).empty());

  Rng rng(21);
  CHECK(features::detect_corners(noise_image(rng, 32, 32), 255, 100).empty());

  CHECK_THROWS_AS(features::detect_corners(solid(6, 6, 0), 20, 100), ImageTooSmall);
}

TEST_CASE("single bright pixel is the only corner") {
  io::Image img = solid(31, 31, 0);
  img.at(10, 10) = 255;
  const auto kps = features::detect_corners(img, 20, 100);
  REQUIRE(kps.size() == 1);
  CHECK(kps[0].x == 10);
  CHECK(kps[0].y == 10);
  CHECK(kps[0].score == 16.0 * 255.0);  // full ring, SAD 255 each
  CHECK(kps[0].orientation == 0.0);     // moments cancel exactly
}

TEST_CASE("intensity centroid orientation on a gradient background") {
  // Background depends on x only, so the dy moment cancels in integer
  // arithmetic; the bright center pixel sits at offset zero and adds nothing.
  io::Image img = solid(41, 41, 0);
  for (int y = 0; y < 41; ++y) {
    for (int x = 0; x < 41; ++x) img.at(x, y) = static_cast<std::uint8_t>(2 * x);
  }
  img.at(20, 20) = 255;
  const auto kps = features::detect_corners(img, 20, 100);
  REQUIRE(kps.size() == 1);
  CHECK(kps[0].x == 20);
  CHECK(kps[0].y == 20);
  CHECK(kps[0].orientation == 0.0);
}

TEST_CASE("detector agrees with the brute-force oracle") {
  Rng rng(22);
  const io::Image img = noise_image(rng, 48, 40);
  const int threshold = 24;
  const auto kps = features::detect_corners(img, threshold, 10000);

  std::vector<std::pair<int, int>> oracle;
  std::vector<double> oracle_score;
  for (int y = 3; y < img.height - 3; ++y) {
    for (int x = 3; x < img.width - 3; ++x) {
      double score = 0;
      if (oracle_fast9(img, x, y, threshold, &score)) {
        oracle.emplace_back(x, y);
        oracle_score.push_back(score);
      }
    }
  }
  REQUIRE(!oracle.empty());  // noise at this threshold must produce corners

  // Every detection is an oracle corner with the oracle's score.
  for (const auto& kp : kps) {
    const auto it = std::find(oracle.begin(), oracle.end(),
                              std::make_pair(static_cast<int>(kp.x), static_cast<int>(kp.y)));
    REQUIRE(it != oracle.end());
    CHECK(kp.score == oracle_score[static_cast<std::size_t>(it - oracle.begin())]);
  }

  // Suppression: no two detections closer than 3 px.
  for (std::size_t i = 0; i < kps.size(); ++i) {
    for (std::size_t j = i + 1; j < kps.size(); ++j) {
      const double dx = kps[i].x - kps[j].x;
      const double dy = kps[i].y - kps[j].y;
      CHECK(dx * dx + dy * dy >= 9.0);
    }
  }

  // Coverage: every oracle corner is either kept or suppressed by a kept
  // corner at least as strong within the suppression radius.
  for (std::size_t o = 0; o < oracle.size(); ++o) {
    bool explained = false;
    for (const auto& kp : kps) {
      const double dx = kp.x - oracle[o].first;
      const double dy = kp.y - oracle[o].second;
      if (dx * dx + dy * dy < 9.0 && kp.score >= oracle_score[o]) {
        explained = true;
        break;
      }
    }
    CHECK(explained);
  }

  // Ranking: scores arrive strongest first.
  for (std::size_t i = 1; i < kps.size(); ++i) CHECK(kps[i - 1].score >= kps[i].score);
}

TEST_CASE("max_keypoints truncates to the strongest") {
  Rng rng(23);
  const io::Image img = noise_image(rng, 48, 40);
  const auto all = features::detect_corners(img, 24, 10000);
  REQUIRE(all.size() > 4);
  const auto top = features::detect_corners(img, 24, 4);
  REQUIRE(top.size() == 4);
  for (std::size_t i = 0; i < top.size(); ++i) {
    CHECK(top[i].x == all[i].x);
    CHECK(top[i].y == all[i].y);
  }
}

TEST_CASE("describe is deterministic and bounded") {
  Rng rng(24);
  const io::Image img = noise_image(rng, 64, 64);
  const io::Image smoothed = io::gaussian_smooth(img);
  Keypoint kp;
  kp.x = 30;
  kp.y = 31;
  kp.orientation = 0.7;
  const Descriptor a = features::describe(smoothed, kp);
  const Descriptor b = features::describe(smoothed, kp);
  CHECK(a == b);
  CHECK(features::hamming_distance(a, b) == 0);

  kp.x = 5;  // pattern reach is 15 px before rotation
  CHECK_THROWS_AS(features::describe(smoothed, kp), OutOfBounds);

  kp.x = 30;
  const auto batch = features::describe_all(smoothed, {kp, kp});
  REQUIRE(batch.size() == 2);
  CHECK(batch[0] == batch[1]);
}

TEST_CASE("descriptor survives a 90 degree rotation") {
  // Star-like blobs give distinctive descriptors and a well-defined
  // orientation. Rotating the raster is a pixel permutation, so the same
  // corner reappears at the mapped position.
  Rng rng(25);
  const auto world = testsupport::make_asterism(rng, 12, Eigen::Vector3d(0, 0, 5),
                                                Eigen::Vector3d(1.1, 1.1, 0.3));
  const io::CameraIntrinsics k{200, 200, 100, 100};
  const vo::Pose identity;
  const io::Image img = testsupport::render_asterism(world, identity, k, 200, 200);

  io::Image rot(img.height, img.width, 1);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      // (u, v) -> (height - 1 - v, u)
      rot.at(img.height - 1 - y, x) = img.at(x, y);
    }
  }

  const int margin = features::kDescribeMargin + 2;
  const auto kps_a = features::detect_corners(img, 20, 50, margin);
  const auto kps_b = features::detect_corners(rot, 20, 50, margin);
  REQUIRE(!kps_a.empty());
  REQUIRE(!kps_b.empty());

  const io::Image smooth_a = io::gaussian_smooth(img);
  const io::Image smooth_b = io::gaussian_smooth(rot);

  int checked = 0;
  for (const auto& kp : kps_a) {
    const double mx = img.height - 1 - kp.y;
    const double my = kp.x;
    const Keypoint* twin = nullptr;
    for (const auto& cand : kps_b) {
      if (std::abs(cand.x - mx) <= 0.5 && std::abs(cand.y - my) <= 0.5) {
        twin = &cand;
        break;
      }
    }
    if (!twin) continue;
    const Descriptor da = features::describe(smooth_a, kp);
    const Descriptor db = features::describe(smooth_b, *twin);
    CHECK(features::hamming_distance(da, db) <= 40);
    ++checked;
  }
  CHECK(checked >= 5);
}

TEST_CASE("match_descriptors identity") {
  Rng rng(26);
  std::vector<Descriptor> set;
  for (int i = 0; i < 12; ++i) set.push_back(random_descriptor(rng));
  const auto matches = features::match_descriptors(set, set, 0.8, true);
  REQUIRE(matches.size() == set.size());
  for (const auto& m : matches) {
    CHECK(m.index_a == m.index_b);
    CHECK(m.distance == 0);
  }
}

TEST_CASE("match_descriptors recovers planted pairs among decoys") {
  Rng rng(27);
  std::vector<Descriptor> set_a;
  std::vector<Descriptor> set_b;
  const int planted = 20;
  for (int i = 0; i < planted; ++i) {
    const Descriptor d = random_descriptor(rng);
    set_a.push_back(d);
    set_b.push_back(flip_bits(d, rng, static_cast<int>(rng.uniform_int(0, 20))));
  }
  for (int i = 0; i < 20; ++i) set_b.push_back(random_descriptor(rng));

  // Exhaustive oracle: each planted partner must be the unique nearest.
  for (int i = 0; i < planted; ++i) {
    for (std::size_t j = 0; j < set_b.size(); ++j) {
      if (static_cast<int>(j) == i) continue;
      CHECK(features::hamming_distance(set_a[static_cast<std::size_t>(i)], set_b[j]) >
            features::hamming_distance(set_a[static_cast<std::size_t>(i)],
                                       set_b[static_cast<std::size_t>(i)]));
    }
  }

  const auto matches = features::match_descriptors(set_a, set_b, 0.8, true);
  REQUIRE(matches.size() == static_cast<std::size_t>(planted));
  std::vector<bool> seen(static_cast<std::size_t>(planted), false);
  for (const auto& m : matches) {
    CHECK(m.index_a == m.index_b);
    CHECK(m.distance <= 20);
    seen[static_cast<std::size_t>(m.index_a)] = true;
  }
  CHECK(std::count(seen.begin(), seen.end(), true) == planted);
}

TEST_CASE("cross-check rejects one-sided matches") {
  Rng rng(28);
  const Descriptor base = random_descriptor(rng);
  // a0 is 30 bits from b0, but b0 prefers a1 at 4 bits.
  const std::vector<Descriptor> set_a = {flip_bits(base, rng, 30), flip_bits(base, rng, 4)};
  const std::vector<Descriptor> set_b = {base, random_descriptor(rng)};

  const auto checked = features::match_descriptors(set_a, set_b, 0.8, true);
  for (const auto& m : checked) CHECK(m.index_a != 0);
  REQUIRE(checked.size() == 1);
  CHECK(checked[0].index_a == 1);
  CHECK(checked[0].index_b == 0);

  const auto unchecked = features::match_descriptors(set_a, set_b, 0.8, false);
  bool found_a0 = false;
  for (const auto& m : unchecked) found_a0 = found_a0 || m.index_a == 0;
  CHECK(found_a0);
}

TEST_CASE("zero second-best distance rejects the ratio test") {
  Rng rng(29);
  const Descriptor d = random_descriptor(rng);
  const std::vector<Descriptor> set_a = {d};
  const std::vector<Descriptor> duplicates = {d, d};
  CHECK(features::match_descriptors(set_a, duplicates, 0.8, false).empty());

  // A single candidate has no second-best; the ratio test is vacuous.
  const auto single = features::match_descriptors(set_a, {d}, 0.8, true);
  REQUIRE(single.size() == 1);
  CHECK(single[0].distance == 0);
}

TEST_CASE("hamming distance is a metric") {
  Rng rng(30);
  for (int trial = 0; trial < 50; ++trial) {
    const Descriptor a = random_descriptor(rng);
    const Descriptor b = random_descriptor(rng);
    const Descriptor c = random_descriptor(rng);
    CHECK(features::hamming_distance(a, a) == 0);
    CHECK(features::hamming_distance(a, b) == features::hamming_distance(b, a));
    CHECK(features::hamming_distance(a, c) <=
          features::hamming_distance(a, b) + features::hamming_distance(b, c));
    CHECK(features::hamming_distance(a, b) >= 0);
    CHECK(features::hamming_distance(a, b) <= 256);
  }
}

TEST_CASE("detection and matching are deterministic") {
  Rng rng(31);
  const io::Image img = noise_image(rng, 64, 48);
  const auto kps1 = features::detect_corners(img, 20, 100);
  const auto kps2 = features::detect_corners(img, 20, 100);
  REQUIRE(kps1.size() == kps2.size());
  for (std::size_t i = 0; i < kps1.size(); ++i) {
    CHECK(kps1[i].x == kps2[i].x);
    CHECK(kps1[i].y == kps2[i].y);
    CHECK(kps1[i].score == kps2[i].score);
    CHECK(kps1[i].orientation == kps2[i].orientation);
  }
}

}  // TEST_SUITE
