#include "panosum/visual_odometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "panosum/errors.hpp"
#include "panosum/pnp.hpp"
#include "panosum/rng.hpp"
#include "panosum/two_view.hpp"

namespace panosum::vo {
namespace {

constexpr std::uint64_t kEssentialStream = 1;
constexpr std::uint64_t kPnpStream = 2;

/// Absolute Hamming gate for guided reassociation of an existing map point.
constexpr int kGuidedMaxHamming = 50;

struct FrameFeatures {
  std::vector<features::Keypoint> keypoints;
  std::vector<features::Descriptor> descriptors;
};

FrameFeatures extract_features(const io::Image& image, const VoConfig& cfg) {
  const io::Image gray = io::to_grayscale(image);
  FrameFeatures out;
  out.keypoints = features::detect_corners(gray, cfg.fast_threshold, cfg.max_keypoints,
                                           kDetectionBorderMargin);
  if (cfg.subpixel_refine) {
    features::refine_keypoints_centroid(gray, out.keypoints, features::kDescribeMargin);
  }
  const io::Image smoothed = io::gaussian_smooth(gray);
  out.descriptors = features::describe_all(smoothed, out.keypoints);
  return out;
}

Eigen::Vector2d kp_pos(const features::Keypoint& kp) { return {kp.x, kp.y}; }

double parallax_deg(const Eigen::Vector3d& X, const Pose& a, const Pose& b) {
  const Eigen::Vector3d ra = X - a.center();
  const Eigen::Vector3d rb = X - b.center();
  const double denom = ra.norm() * rb.norm();
  if (denom < 1e-300) return 0;
  const double c = std::clamp(ra.dot(rb) / denom, -1.0, 1.0);
  return std::acos(c) * 180.0 / std::numbers::pi;
}

}  // namespace

double median_displacement(const std::vector<features::Match>& matches,
                           const std::vector<features::Keypoint>& keypoints_a,
                           const std::vector<features::Keypoint>& keypoints_b) {
  if (matches.empty()) return 0;
  std::vector<double> d;
  d.reserve(matches.size());
  for (const auto& m : matches) {
    const auto& a = keypoints_a[static_cast<std::size_t>(m.index_a)];
    const auto& b = keypoints_b[static_cast<std::size_t>(m.index_b)];
    d.push_back(std::hypot(b.x - a.x, b.y - a.y));
  }
  std::sort(d.begin(), d.end());
  const std::size_t n = d.size();
  return n % 2 == 1 ? d[n / 2] : 0.5 * (d[n / 2 - 1] + d[n / 2]);
}

bool keyframe_decision(const std::vector<features::Match>& tracked_matches,
                       const std::vector<features::Keypoint>& keyframe_keypoints,
                       const std::vector<features::Keypoint>& frame_keypoints,
                       int frames_since_keyframe, const KeyframePolicy& policy) {
  if (frames_since_keyframe >= policy.n_max) return true;
  if (!keyframe_keypoints.empty()) {
    const double fraction = static_cast<double>(tracked_matches.size()) /
                            static_cast<double>(keyframe_keypoints.size());
    if (fraction < policy.tau_r) return true;
  }
  return median_displacement(tracked_matches, keyframe_keypoints, frame_keypoints) >
         policy.tau_d;
}

namespace {

/// Mutable VO state shared by the bootstrap and tracking stages.
struct VoState {
  std::vector<Keyframe> keyframes;
  std::vector<std::vector<int>> kp_to_mp;  // per keyframe: keypoint -> map point id or -1
  std::vector<MapPoint> map_points;
  std::vector<bool> alive;
  VoDiagnostics diag;

  int add_map_point(const Eigen::Vector3d& X, int kf_a, int kp_a, int kf_b, int kp_b) {
    const int id = static_cast<int>(map_points.size());
    map_points.push_back({id, X, {{kf_a, kp_a}, {kf_b, kp_b}}});
    alive.push_back(true);
    kp_to_mp[static_cast<std::size_t>(kf_a)][static_cast<std::size_t>(kp_a)] = id;
    kp_to_mp[static_cast<std::size_t>(kf_b)][static_cast<std::size_t>(kp_b)] = id;
    return id;
  }

  int mp_at(int kf, int kp) const {
    const int id = kp_to_mp[static_cast<std::size_t>(kf)][static_cast<std::size_t>(kp)];
    return (id >= 0 && alive[static_cast<std::size_t>(id)]) ? id : -1;
  }
};

/// Candidate triangulation passing depth, reprojection, and parallax gates.
bool admit_point(const Pose& pa, const Pose& pb, const Eigen::Vector2d& xa,
                 const Eigen::Vector2d& xb, const io::CameraIntrinsics& k,
                 const VoConfig& cfg, Eigen::Vector3d* out) {
  TriangulationResult tri;
  try {
    tri = triangulate(pa, pb, xa, xb, k);
  } catch (const Error&) {
    return false;
  }
  if (!tri.positive_depth_a || !tri.positive_depth_b) return false;
  try {
    if (reprojection_error(pa, k, tri.point, xa) > cfg.max_reprojection_px) return false;
    if (reprojection_error(pb, k, tri.point, xb) > cfg.max_reprojection_px) return false;
  } catch (const BehindCamera&) {
    return false;
  }
  if (parallax_deg(tri.point, pa, pb) < cfg.min_parallax_deg) return false;
  *out = tri.point;
  return true;
}

bool try_initialize(VoState& st, int prev_id, int cur_id,
                    const std::vector<features::Match>& matches,
                    const io::CameraIntrinsics& k, const VoConfig& cfg,
                    int* inliers_out) {
  Keyframe& prev = st.keyframes[static_cast<std::size_t>(prev_id)];
  Keyframe& cur = st.keyframes[static_cast<std::size_t>(cur_id)];
  if (matches.size() < 8) return false;
  if (median_displacement(matches, prev.keypoints, cur.keypoints) <= cfg.keyframe.tau_d) {
    return false;
  }
  std::vector<Eigen::Vector2d> pa;
  std::vector<Eigen::Vector2d> pb;
  pa.reserve(matches.size());
  pb.reserve(matches.size());
  for (const auto& m : matches) {
    pa.push_back(kp_pos(prev.keypoints[static_cast<std::size_t>(m.index_a)]));
    pb.push_back(kp_pos(cur.keypoints[static_cast<std::size_t>(m.index_b)]));
  }
  EssentialResult ess;
  try {
    ess = estimate_essential_ransac(pa, pb, k, cfg.essential_threshold_px,
                                    cfg.ransac_max_iters,
                                    derive_seed(cfg.seed, kEssentialStream,
                                                static_cast<std::uint64_t>(cur_id)));
  } catch (const Error&) {
    return false;
  }
  if (static_cast<int>(ess.inliers.size()) < cfg.min_init_inliers) return false;

  std::vector<Eigen::Vector2d> ia;
  std::vector<Eigen::Vector2d> ib;
  for (int idx : ess.inliers) {
    ia.push_back(pa[static_cast<std::size_t>(idx)]);
    ib.push_back(pb[static_cast<std::size_t>(idx)]);
  }
  Pose rel;
  try {
    rel = decompose_essential(ess.E, ia, ib, k);
  } catch (const Error&) {
    return false;
  }

  const Pose anchor;  // identity: world = previous keyframe's camera
  std::vector<std::tuple<Eigen::Vector3d, int, int>> admitted;
  for (int idx : ess.inliers) {
    const auto& m = matches[static_cast<std::size_t>(idx)];
    Eigen::Vector3d X;
    if (admit_point(anchor, rel, pa[static_cast<std::size_t>(idx)],
                    pb[static_cast<std::size_t>(idx)], k, cfg, &X)) {
      admitted.emplace_back(X, m.index_a, m.index_b);
    }
  }
  if (static_cast<int>(admitted.size()) < cfg.min_init_map_points) return false;

  prev.pose = anchor;
  cur.pose = rel;
  for (const auto& [X, kp_a, kp_b] : admitted) {
    st.add_map_point(X, prev_id, kp_a, cur_id, kp_b);
  }
  st.diag.initialized = true;
  st.diag.init_keyframe_a = prev_id;
  st.diag.init_keyframe_b = cur_id;
  *inliers_out = static_cast<int>(ess.inliers.size());
  return true;
}

// Map maintenance after each keyframe: joint bundle adjustment of all live
// poses and points, then residual-gated observation pruning. Gates derive
// from the observed residual distribution, so the same code tolerates clean
// synthetic input and pixel-noise imagery without extra knobs.
constexpr int kMaintenanceRounds = 3;
constexpr int kBundleIterations = 8;
constexpr double kScaleFloorPx = 0.01;   // uint8 quantization keeps residuals above this
constexpr double kHuberSigmas = 3.0;
constexpr double kPruneSigmas = 6.0;
constexpr double kPruneFloorPx = 0.06;

/// 1.4826 MAD of reprojection residuals over all live observations.
double robust_residual_scale(const VoState& st, const io::CameraIntrinsics& k) {
  std::vector<double> r;
  for (std::size_t i = 0; i < st.map_points.size(); ++i) {
    if (!st.alive[i]) continue;
    for (const auto& [kf_id, kp_idx] : st.map_points[i].observations) {
      const Keyframe& kf = st.keyframes[static_cast<std::size_t>(kf_id)];
      if (!kf.pose) continue;
      try {
        r.push_back(reprojection_error(*kf.pose, k, st.map_points[i].position,
                                       kp_pos(kf.keypoints[static_cast<std::size_t>(kp_idx)])));
      } catch (const BehindCamera&) {
      }
    }
  }
  if (r.empty()) return kScaleFloorPx;
  const auto mid = r.begin() + static_cast<std::ptrdiff_t>(r.size() / 2);
  std::nth_element(r.begin(), mid, r.end());
  const double med = *mid;
  for (double& v : r) v = std::abs(v - med);
  std::nth_element(r.begin(), mid, r.end());
  return std::max(1.4826 * *mid, kScaleFloorPx);
}

/// Joint pose-and-point refinement over the whole live reconstruction.
/// Levenberg-Marquardt with Huber IRLS weights and a Schur complement on the
/// point block; the gauge anchor keyframe stays fixed. Sizes stay small (tens
/// of keyframes), so the reduced camera system is solved densely.
void bundle_adjust(VoState& st, const io::CameraIntrinsics& k, double huber_px,
                   int max_iterations) {
  std::vector<int> pose_slot(st.keyframes.size(), -1);
  std::vector<Keyframe*> pose_kfs;
  for (Keyframe& kf : st.keyframes) {
    if (!kf.pose || kf.id == st.diag.init_keyframe_a) continue;
    pose_slot[static_cast<std::size_t>(kf.id)] = static_cast<int>(pose_kfs.size());
    pose_kfs.push_back(&kf);
  }
  std::vector<MapPoint*> pts;
  for (std::size_t i = 0; i < st.map_points.size(); ++i) {
    if (st.alive[i]) pts.push_back(&st.map_points[i]);
  }
  const int m = static_cast<int>(pose_kfs.size());
  const int n = static_cast<int>(pts.size());
  if (m == 0 || n == 0) return;

  struct Obs {
    int point;
    int kf_id;
    int slot;  // -1 for the anchor keyframe
    Eigen::Vector2d x;
  };
  std::vector<Obs> obs;
  for (int p = 0; p < n; ++p) {
    for (const auto& [kf_id, kp_idx] : pts[static_cast<std::size_t>(p)]->observations) {
      const Keyframe& kf = st.keyframes[static_cast<std::size_t>(kf_id)];
      if (!kf.pose) continue;
      obs.push_back({p, kf_id, pose_slot[static_cast<std::size_t>(kf_id)],
                     kp_pos(kf.keypoints[static_cast<std::size_t>(kp_idx)])});
    }
  }
  if (obs.empty()) return;

  const auto robust_cost = [&](const std::vector<Pose>& poses,
                               const std::vector<Eigen::Vector3d>& xs) {
    double c = 0;
    for (const Obs& o : obs) {
      const Pose& pose = o.slot >= 0
                             ? poses[static_cast<std::size_t>(o.slot)]
                             : *st.keyframes[static_cast<std::size_t>(o.kf_id)].pose;
      const Eigen::Vector3d pc = pose.R * xs[static_cast<std::size_t>(o.point)] + pose.t;
      if (pc.z() <= 1e-12) return std::numeric_limits<double>::infinity();
      const Eigen::Vector2d proj(k.fx * pc.x() / pc.z() + k.cx,
                                 k.fy * pc.y() / pc.z() + k.cy);
      const double e = (proj - o.x).norm();
      c += e <= huber_px ? 0.5 * e * e : huber_px * (e - 0.5 * huber_px);
    }
    return c;
  };

  std::vector<Pose> poses(static_cast<std::size_t>(m));
  for (int s = 0; s < m; ++s) poses[static_cast<std::size_t>(s)] = *pose_kfs[static_cast<std::size_t>(s)]->pose;
  std::vector<Eigen::Vector3d> xs(static_cast<std::size_t>(n));
  for (int p = 0; p < n; ++p) xs[static_cast<std::size_t>(p)] = pts[static_cast<std::size_t>(p)]->position;

  double cost = robust_cost(poses, xs);
  if (!std::isfinite(cost)) return;
  double lambda = 1e-6;

  for (int iter = 0; iter < max_iterations; ++iter) {
    Eigen::MatrixXd u = Eigen::MatrixXd::Zero(6 * m, 6 * m);
    Eigen::VectorXd gp = Eigen::VectorXd::Zero(6 * m);
    std::vector<Eigen::Matrix3d> v(static_cast<std::size_t>(n), Eigen::Matrix3d::Zero());
    std::vector<Eigen::Vector3d> gx(static_cast<std::size_t>(n), Eigen::Vector3d::Zero());
    // Pose-point coupling blocks, grouped by point for the Schur step.
    std::vector<std::vector<std::pair<int, Eigen::Matrix<double, 6, 3>>>> w(
        static_cast<std::size_t>(n));

    for (const Obs& o : obs) {
      const Pose& pose = o.slot >= 0
                             ? poses[static_cast<std::size_t>(o.slot)]
                             : *st.keyframes[static_cast<std::size_t>(o.kf_id)].pose;
      const Eigen::Vector3d rotated = pose.R * xs[static_cast<std::size_t>(o.point)];
      const Eigen::Vector3d pc = rotated + pose.t;
      if (pc.z() <= 1e-12) continue;
      const double iz = 1.0 / pc.z();
      Eigen::Matrix<double, 2, 3> jproj;
      jproj << k.fx * iz, 0, -k.fx * pc.x() * iz * iz, 0, k.fy * iz,
          -k.fy * pc.y() * iz * iz;
      const Eigen::Vector2d r =
          Eigen::Vector2d(k.fx * pc.x() * iz + k.cx, k.fy * pc.y() * iz + k.cy) - o.x;
      const double e = r.norm();
      const double wgt = e <= huber_px ? 1.0 : huber_px / e;

      const Eigen::Matrix<double, 2, 3> jx = jproj * pose.R;
      v[static_cast<std::size_t>(o.point)] += wgt * jx.transpose() * jx;
      gx[static_cast<std::size_t>(o.point)] += wgt * jx.transpose() * r;
      if (o.slot >= 0) {
        Eigen::Matrix<double, 3, 6> jpose;
        jpose.leftCols<3>() = -skew(rotated);
        jpose.rightCols<3>() = Eigen::Matrix3d::Identity();
        const Eigen::Matrix<double, 2, 6> jp = jproj * jpose;
        u.block<6, 6>(6 * o.slot, 6 * o.slot) += wgt * jp.transpose() * jp;
        gp.segment<6>(6 * o.slot) += wgt * jp.transpose() * r;
        w[static_cast<std::size_t>(o.point)].emplace_back(o.slot,
                                                          wgt * jp.transpose() * jx);
      }
    }

    bool improved = false;
    for (int attempt = 0; attempt < 6; ++attempt) {
      Eigen::MatrixXd s = u;
      for (int d = 0; d < 6 * m; ++d) s(d, d) += lambda * (1.0 + u(d, d));
      Eigen::VectorXd rhs = -gp;
      std::vector<Eigen::Matrix3d> vinv(static_cast<std::size_t>(n));
      bool degenerate = false;
      for (int p = 0; p < n; ++p) {
        Eigen::Matrix3d vd = v[static_cast<std::size_t>(p)];
        for (int d = 0; d < 3; ++d) vd(d, d) += lambda * (1.0 + vd(d, d));
        const Eigen::Matrix3d inv = vd.inverse();
        if (!inv.allFinite()) {
          degenerate = true;
          break;
        }
        vinv[static_cast<std::size_t>(p)] = inv;
        for (const auto& [sa, wa] : w[static_cast<std::size_t>(p)]) {
          rhs.segment<6>(6 * sa) += wa * inv * gx[static_cast<std::size_t>(p)];
          for (const auto& [sb, wb] : w[static_cast<std::size_t>(p)]) {
            s.block<6, 6>(6 * sa, 6 * sb) -= wa * inv * wb.transpose();
          }
        }
      }
      if (degenerate) {
        lambda *= 10;
        continue;
      }
      const Eigen::VectorXd dp = s.ldlt().solve(rhs);
      if (!dp.allFinite()) {
        lambda *= 10;
        continue;
      }

      std::vector<Pose> cand_poses(static_cast<std::size_t>(m));
      for (int sl = 0; sl < m; ++sl) {
        const Eigen::Matrix<double, 6, 1> d = dp.segment<6>(6 * sl);
        Pose upd;
        upd.R = orthonormalize(rodrigues(d.head<3>()) * poses[static_cast<std::size_t>(sl)].R);
        upd.t = poses[static_cast<std::size_t>(sl)].t + d.tail<3>();
        cand_poses[static_cast<std::size_t>(sl)] = upd;
      }
      std::vector<Eigen::Vector3d> cand_xs(static_cast<std::size_t>(n));
      for (int p = 0; p < n; ++p) {
        Eigen::Vector3d acc = -gx[static_cast<std::size_t>(p)];
        for (const auto& [sa, wa] : w[static_cast<std::size_t>(p)]) {
          acc -= wa.transpose() * dp.segment<6>(6 * sa);
        }
        cand_xs[static_cast<std::size_t>(p)] =
            xs[static_cast<std::size_t>(p)] + vinv[static_cast<std::size_t>(p)] * acc;
      }

      const double c = robust_cost(cand_poses, cand_xs);
      if (c < cost) {
        poses = std::move(cand_poses);
        xs = std::move(cand_xs);
        cost = c;
        lambda = std::max(lambda * 0.1, 1e-12);
        improved = true;
        break;
      }
      lambda *= 10;
    }
    if (!improved) break;
  }

  for (int sl = 0; sl < m; ++sl) *pose_kfs[static_cast<std::size_t>(sl)]->pose = poses[static_cast<std::size_t>(sl)];
  for (int p = 0; p < n; ++p) pts[static_cast<std::size_t>(p)]->position = xs[static_cast<std::size_t>(p)];
}

/// Drops observations over the gate; points left with fewer than two die.
void prune_observations(VoState& st, const io::CameraIntrinsics& k, double gate_px) {
  for (std::size_t i = 0; i < st.map_points.size(); ++i) {
    if (!st.alive[i]) continue;
    MapPoint& mp = st.map_points[i];
    std::vector<std::pair<int, int>> kept;
    for (const auto& [kf_id, kp_idx] : mp.observations) {
      const Keyframe& kf = st.keyframes[static_cast<std::size_t>(kf_id)];
      bool ok = kf.pose.has_value();
      if (ok) {
        try {
          ok = reprojection_error(*kf.pose, k, mp.position,
                                  kp_pos(kf.keypoints[static_cast<std::size_t>(kp_idx)])) <=
               gate_px;
        } catch (const BehindCamera&) {
          ok = false;
        }
      }
      if (ok) {
        kept.emplace_back(kf_id, kp_idx);
      } else {
        st.kp_to_mp[static_cast<std::size_t>(kf_id)][static_cast<std::size_t>(kp_idx)] = -1;
      }
    }
    if (kept.size() < 2) {
      for (const auto& [kf_id, kp_idx] : kept) {
        st.kp_to_mp[static_cast<std::size_t>(kf_id)][static_cast<std::size_t>(kp_idx)] = -1;
      }
      st.alive[i] = false;
      ++st.diag.culled_map_points;
    } else {
      mp.observations = std::move(kept);
    }
  }
}

/// Rescales the reconstruction so the init baseline is unit again. A pure
/// scale gauge move: every reprojection is left bit-for-bit unchanged in
/// exact arithmetic.
void renormalize_scale(VoState& st) {
  const int b = st.diag.init_keyframe_b;
  if (b < 0) return;
  const Keyframe& kfb = st.keyframes[static_cast<std::size_t>(b)];
  if (!kfb.pose) return;
  const double s = kfb.pose->t.norm();
  if (s < 1e-12) return;
  for (Keyframe& kf : st.keyframes) {
    if (kf.pose) kf.pose->t /= s;
  }
  for (std::size_t i = 0; i < st.map_points.size(); ++i) {
    if (st.alive[i]) st.map_points[i].position /= s;
  }
}

void maintain_map(VoState& st, const io::CameraIntrinsics& k, const VoConfig& cfg) {
  if (!st.diag.initialized) return;
  for (int round = 0; round < kMaintenanceRounds; ++round) {
    const double sigma = robust_residual_scale(st, k);
    bundle_adjust(st, k, kHuberSigmas * sigma, kBundleIterations);
    const double gate = std::clamp(kPruneSigmas * robust_residual_scale(st, k),
                                   kPruneFloorPx, cfg.max_reprojection_px);
    prune_observations(st, k, gate);
  }
  renormalize_scale(st);
}

void cull_map(VoState& st, const io::CameraIntrinsics& k, const VoConfig& cfg) {
  for (std::size_t i = 0; i < st.map_points.size(); ++i) {
    if (!st.alive[i]) continue;
    const MapPoint& mp = st.map_points[i];
    bool keep = mp.observations.size() >= 2;
    for (const auto& [kf_id, kp_idx] : mp.observations) {
      if (!keep) break;
      const Keyframe& kf = st.keyframes[static_cast<std::size_t>(kf_id)];
      if (!kf.pose) {
        keep = false;
        break;
      }
      try {
        const double err = reprojection_error(
            *kf.pose, k, mp.position,
            kp_pos(kf.keypoints[static_cast<std::size_t>(kp_idx)]));
        if (err > cfg.max_reprojection_px) keep = false;
      } catch (const BehindCamera&) {
        keep = false;
      }
    }
    if (!keep) {
      st.alive[i] = false;
      ++st.diag.culled_map_points;
    }
  }
}

void localize_and_extend(VoState& st, int prev_id, int cur_id,
                         const std::vector<features::Match>& matches,
                         const io::CameraIntrinsics& k, const VoConfig& cfg,
                         KeyframeDiagnostics* kd) {
  Keyframe& prev = st.keyframes[static_cast<std::size_t>(prev_id)];
  Keyframe& cur = st.keyframes[static_cast<std::size_t>(cur_id)];
  if (!prev.pose) return;  // tracking already broken; no map path to localize

  std::vector<Eigen::Vector3d> p3;
  std::vector<Eigen::Vector2d> p2;
  std::vector<int> mp_ids;
  std::vector<int> kp_idx;
  for (const auto& m : matches) {
    const int mp = st.mp_at(prev_id, m.index_a);
    if (mp < 0) continue;
    p3.push_back(st.map_points[static_cast<std::size_t>(mp)].position);
    p2.push_back(kp_pos(cur.keypoints[static_cast<std::size_t>(m.index_b)]));
    mp_ids.push_back(mp);
    kp_idx.push_back(m.index_b);
  }
  if (p3.size() < 6) return;

  PnpResult pnp;
  try {
    pnp = estimate_pose_pnp(p3, p2, k, *prev.pose, cfg.pnp_threshold_px,
                            cfg.ransac_max_iters,
                            derive_seed(cfg.seed, kPnpStream,
                                        static_cast<std::uint64_t>(cur_id)));
  } catch (const Error&) {
    return;
  }
  cur.pose = pnp.pose;
  kd->localized = true;
  kd->inliers = static_cast<int>(pnp.inliers.size());
  for (int i : pnp.inliers) {
    const int mp = mp_ids[static_cast<std::size_t>(i)];
    const int kp = kp_idx[static_cast<std::size_t>(i)];
    if (st.kp_to_mp[static_cast<std::size_t>(cur_id)][static_cast<std::size_t>(kp)] >= 0) {
      continue;  // keypoint already claimed through another match
    }
    st.map_points[static_cast<std::size_t>(mp)].observations.emplace_back(cur_id, kp);
    st.kp_to_mp[static_cast<std::size_t>(cur_id)][static_cast<std::size_t>(kp)] = mp;
  }

  // Guided reassociation: project unlinked live points into the new keyframe
  // and claim descriptor-compatible keypoints nearby. Keeps a track alive when
  // one pairwise match drops, which otherwise forces a short-baseline
  // duplicate point.
  for (std::size_t i = 0; i < st.map_points.size(); ++i) {
    if (!st.alive[i]) continue;
    MapPoint& mp = st.map_points[i];
    bool linked = false;
    for (const auto& [kf_id, unused] : mp.observations) {
      if (kf_id == cur_id) {
        linked = true;
        break;
      }
    }
    if (linked) continue;
    const Eigen::Vector3d pc = cur.pose->R * mp.position + cur.pose->t;
    if (pc.z() <= 0) continue;
    const Eigen::Vector2d proj(k.fx * pc.x() / pc.z() + k.cx, k.fy * pc.y() / pc.z() + k.cy);

    int src_kf = -1, src_kp = -1;
    for (const auto& [kf_id, kp2] : mp.observations) {
      if (kf_id > src_kf) {
        src_kf = kf_id;
        src_kp = kp2;
      }
    }
    if (src_kf < 0) continue;
    const auto& mp_desc =
        st.keyframes[static_cast<std::size_t>(src_kf)].descriptors[static_cast<std::size_t>(src_kp)];

    int best_kp = -1;
    int best_dist = kGuidedMaxHamming + 1;
    for (std::size_t kp2 = 0; kp2 < cur.keypoints.size(); ++kp2) {
      if (st.kp_to_mp[static_cast<std::size_t>(cur_id)][kp2] >= 0) continue;
      if ((kp_pos(cur.keypoints[kp2]) - proj).norm() > cfg.pnp_threshold_px) continue;
      const int d = features::hamming_distance(mp_desc, cur.descriptors[kp2]);
      if (d < best_dist) {
        best_dist = d;
        best_kp = static_cast<int>(kp2);
      }
    }
    if (best_kp < 0) continue;
    mp.observations.emplace_back(cur_id, best_kp);
    st.kp_to_mp[static_cast<std::size_t>(cur_id)][static_cast<std::size_t>(best_kp)] =
        static_cast<int>(i);
  }

  // Extend the map from still-unassociated tracked matches.
  for (const auto& m : matches) {
    if (st.mp_at(prev_id, m.index_a) >= 0) continue;
    if (st.kp_to_mp[static_cast<std::size_t>(cur_id)][static_cast<std::size_t>(m.index_b)] >= 0) {
      continue;
    }
    Eigen::Vector3d X;
    if (admit_point(*prev.pose, *cur.pose,
                    kp_pos(prev.keypoints[static_cast<std::size_t>(m.index_a)]),
                    kp_pos(cur.keypoints[static_cast<std::size_t>(m.index_b)]), k, cfg,
                    &X)) {
      st.add_map_point(X, prev_id, m.index_a, cur_id, m.index_b);
    }
  }
}

}  // namespace

VoResult run_vo(const std::vector<io::Frame>& frames,
                const io::CameraIntrinsics& intrinsics, const VoConfig& config) {
  if (frames.empty()) throw EmptySequence("run_vo: no frames");

  VoState st;
  {
    FrameFeatures f0 = extract_features(frames[0].image, config);
    Keyframe kf0;
    kf0.id = 0;
    kf0.frame_index = frames[0].index;
    kf0.keypoints = std::move(f0.keypoints);
    kf0.descriptors = std::move(f0.descriptors);
    st.kp_to_mp.emplace_back(kf0.keypoints.size(), -1);
    st.diag.per_keyframe.push_back({0, kf0.frame_index, 0, 0, false});
    st.keyframes.push_back(std::move(kf0));
  }

  for (std::size_t fi = 1; fi < frames.size(); ++fi) {
    FrameFeatures feats = extract_features(frames[fi].image, config);
    const Keyframe& last = st.keyframes.back();
    const auto matches = features::match_descriptors(last.descriptors, feats.descriptors,
                                                     config.match_ratio, true);
    const int frames_since = frames[fi].index - last.frame_index;
    if (!keyframe_decision(matches, last.keypoints, feats.keypoints, frames_since,
                           config.keyframe)) {
      continue;
    }

    const int prev_id = st.keyframes.back().id;
    const int cur_id = prev_id + 1;
    Keyframe kf;
    kf.id = cur_id;
    kf.frame_index = frames[fi].index;
    kf.keypoints = std::move(feats.keypoints);
    kf.descriptors = std::move(feats.descriptors);
    st.kp_to_mp.emplace_back(kf.keypoints.size(), -1);
    st.keyframes.push_back(std::move(kf));

    KeyframeDiagnostics kd;
    kd.keyframe_id = cur_id;
    kd.frame_index = frames[fi].index;
    kd.tracked_matches = static_cast<int>(matches.size());

    if (!st.diag.initialized) {
      int inliers = 0;
      if (try_initialize(st, prev_id, cur_id, matches, intrinsics, config, &inliers)) {
        kd.localized = true;
        kd.inliers = inliers;
        maintain_map(st, intrinsics, config);
      }
    } else {
      localize_and_extend(st, prev_id, cur_id, matches, intrinsics, config, &kd);
      maintain_map(st, intrinsics, config);
      cull_map(st, intrinsics, config);
    }
    st.diag.per_keyframe.push_back(kd);
  }

  VoResult result;
  result.diagnostics = std::move(st.diag);
  for (std::size_t i = 0; i < st.map_points.size(); ++i) {
    if (st.alive[i]) result.map_points.push_back(std::move(st.map_points[i]));
  }
  for (Keyframe& kf : st.keyframes) {
    std::vector<int> observed;
    for (int id : st.kp_to_mp[static_cast<std::size_t>(kf.id)]) {
      if (id >= 0 && st.alive[static_cast<std::size_t>(id)]) observed.push_back(id);
    }
    std::sort(observed.begin(), observed.end());
    observed.erase(std::unique(observed.begin(), observed.end()), observed.end());
    kf.map_point_ids = std::move(observed);
  }
  result.keyframes = std::move(st.keyframes);
  return result;
}

}  // namespace panosum::vo
