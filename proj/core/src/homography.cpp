#include "panosum/homography.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Dense>

#include "panosum/errors.hpp"
#include "panosum/rng.hpp"

namespace panosum::stitch {
namespace {

Eigen::Matrix3d hartley_transform(const std::vector<Eigen::Vector2d>& pts) {
  Eigen::Vector2d centroid = Eigen::Vector2d::Zero();
  for (const auto& p : pts) centroid += p;
  centroid /= static_cast<double>(pts.size());
  double mean_dist = 0;
  for (const auto& p : pts) mean_dist += (p - centroid).norm();
  mean_dist /= static_cast<double>(pts.size());
  const double s = mean_dist > 1e-300 ? std::numbers::sqrt2 / mean_dist : 1.0;
  Eigen::Matrix3d t;
  t << s, 0, -s * centroid.x(), 0, s, -s * centroid.y(), 0, 0, 1;
  return t;
}

int adaptive_iters(int inliers, int total, int sample_size, int cap) {
  const double w = static_cast<double>(inliers) / static_cast<double>(total);
  const double p_sample = std::pow(w, sample_size);
  if (p_sample >= 1.0) return 1;
  if (p_sample <= 0.0) return cap;
  const double n = std::log(1.0 - 0.99) / std::log(1.0 - p_sample);
  if (!(n < static_cast<double>(cap))) return cap;
  return std::max(1, static_cast<int>(std::ceil(n)));
}

}  // namespace

Homography normalized(const Eigen::Matrix3d& h) {
  const double fro = h.norm();
  if (!(fro > 0) || !h.allFinite()) {
    throw DegenerateConfiguration("homography: non-finite or zero matrix");
  }
  Eigen::Matrix3d out;
  if (std::abs(h(2, 2)) > 1e-12 * fro) {
    out = h / h(2, 2);
  } else {
    out = h / fro;
    // Deterministic sign: make the entry of largest magnitude positive.
    Eigen::Index r = 0;
    Eigen::Index c = 0;
    h.cwiseAbs().maxCoeff(&r, &c);
    if (out(r, c) < 0) out = -out;
  }
  if (std::abs(out.determinant()) <= 1e-12) {
    throw DegenerateConfiguration("homography: singular matrix");
  }
  return {out};
}

Eigen::Vector2d apply_homography(const Eigen::Matrix3d& h, const Eigen::Vector2d& p) {
  const Eigen::Vector3d q = h * Eigen::Vector3d(p.x(), p.y(), 1.0);
  return {q.x() / q.z(), q.y() / q.z()};
}

double symmetric_transfer_error(const Eigen::Matrix3d& h, const Eigen::Vector2d& a,
                                const Eigen::Vector2d& b) {
  const Eigen::Matrix3d hinv = h.inverse();
  return (apply_homography(h, a) - b).norm() + (apply_homography(hinv, b) - a).norm();
}

Homography estimate_homography_dlt(const std::vector<Eigen::Vector2d>& src,
                                   const std::vector<Eigen::Vector2d>& dst) {
  if (src.size() != dst.size()) {
    throw InvalidValue("estimate_homography_dlt: size mismatch");
  }
  if (src.size() < 4) {
    throw InsufficientMatches("estimate_homography_dlt: need 4, got " +
                              std::to_string(src.size()));
  }
  const Eigen::Matrix3d ts = hartley_transform(src);
  const Eigen::Matrix3d td = hartley_transform(dst);

  const auto n = static_cast<Eigen::Index>(src.size());
  Eigen::MatrixXd m(2 * n, 9);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& s = src[static_cast<std::size_t>(i)];
    const auto& d = dst[static_cast<std::size_t>(i)];
    const double x = ts(0, 0) * s.x() + ts(0, 2);
    const double y = ts(1, 1) * s.y() + ts(1, 2);
    const double u = td(0, 0) * d.x() + td(0, 2);
    const double v = td(1, 1) * d.y() + td(1, 2);
    m.row(2 * i) << 0, 0, 0, -x, -y, -1, v * x, v * y, v;
    m.row(2 * i + 1) << x, y, 1, 0, 0, 0, -u * x, -u * y, -u;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  // Rank-deficient data (collinear/coincident points) leaves the null space
  // ambiguous: the two smallest singular values coincide.
  if (sv(7) - sv(8) <= 1e-12 * sv(0)) {
    throw DegenerateConfiguration("estimate_homography_dlt: null space not unique");
  }
  const Eigen::VectorXd hv = svd.matrixV().col(8);
  Eigen::Matrix3d hn;
  hn << hv(0), hv(1), hv(2), hv(3), hv(4), hv(5), hv(6), hv(7), hv(8);
  return normalized(td.inverse() * hn * ts);
}

HomographyResult estimate_homography_ransac(const std::vector<features::Match>& matches,
                                            const std::vector<features::Keypoint>& keypoints_a,
                                            const std::vector<features::Keypoint>& keypoints_b,
                                            double threshold_px, int max_iters,
                                            std::uint64_t seed) {
  const int n = static_cast<int>(matches.size());
  if (n < 4) {
    throw InsufficientMatches("estimate_homography_ransac: need 4, got " +
                              std::to_string(n));
  }
  std::vector<Eigen::Vector2d> pa(matches.size());
  std::vector<Eigen::Vector2d> pb(matches.size());
  for (int i = 0; i < n; ++i) {
    const auto& m = matches[static_cast<std::size_t>(i)];
    const auto& ka = keypoints_a[static_cast<std::size_t>(m.index_a)];
    const auto& kb = keypoints_b[static_cast<std::size_t>(m.index_b)];
    pa[static_cast<std::size_t>(i)] = {ka.x, ka.y};
    pb[static_cast<std::size_t>(i)] = {kb.x, kb.y};
  }

  const auto score = [&](const Eigen::Matrix3d& h) {
    std::vector<int> inliers;
    const Eigen::Matrix3d hinv = h.inverse();
    for (int i = 0; i < n; ++i) {
      const auto& a = pa[static_cast<std::size_t>(i)];
      const auto& b = pb[static_cast<std::size_t>(i)];
      const double err = (apply_homography(h, a) - b).norm() +
                         (apply_homography(hinv, b) - a).norm();
      if (err < threshold_px) inliers.push_back(i);
    }
    return inliers;
  };

  Rng rng(seed);
  Eigen::Matrix3d best_h = Eigen::Matrix3d::Identity();
  std::vector<int> best_inliers;
  int needed = max_iters;
  std::vector<int> pool(static_cast<std::size_t>(n));
  std::vector<Eigen::Vector2d> s4(4);
  std::vector<Eigen::Vector2d> d4(4);
  for (int iter = 0; iter < needed; ++iter) {
    for (int i = 0; i < n; ++i) pool[static_cast<std::size_t>(i)] = i;
    for (int k = 0; k < 4; ++k) {
      const auto j = k + static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(n - k)));
      std::swap(pool[static_cast<std::size_t>(k)], pool[static_cast<std::size_t>(j)]);
      s4[static_cast<std::size_t>(k)] = pa[static_cast<std::size_t>(pool[static_cast<std::size_t>(k)])];
      d4[static_cast<std::size_t>(k)] = pb[static_cast<std::size_t>(pool[static_cast<std::size_t>(k)])];
    }
    Eigen::Matrix3d h;
    try {
      h = estimate_homography_dlt(s4, d4).H;
    } catch (const Error&) {
      continue;  // degenerate minimal sample
    }
    std::vector<int> inliers = score(h);
    if (inliers.size() > best_inliers.size()) {
      best_h = h;
      best_inliers = std::move(inliers);
      needed = std::min(needed, adaptive_iters(static_cast<int>(best_inliers.size()), n, 4,
                                               max_iters));
    }
  }
  if (static_cast<int>(best_inliers.size()) < 4) {
    throw NoConsensus("estimate_homography_ransac: consensus below 4");
  }

  std::vector<Eigen::Vector2d> src;
  std::vector<Eigen::Vector2d> dst;
  for (int i : best_inliers) {
    src.push_back(pa[static_cast<std::size_t>(i)]);
    dst.push_back(pb[static_cast<std::size_t>(i)]);
  }
  Homography final_h{best_h};
  try {
    final_h = estimate_homography_dlt(src, dst);
  } catch (const Error&) {
    final_h = normalized(best_h);
  }
  std::vector<int> final_inliers = score(final_h.H);
  if (static_cast<int>(final_inliers.size()) < 4) {
    final_h = normalized(best_h);
    final_inliers = std::move(best_inliers);
  }
  return {final_h, std::move(final_inliers)};
}

}  // namespace panosum::stitch
