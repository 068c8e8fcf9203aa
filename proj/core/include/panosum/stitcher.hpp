#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include <Eigen/Core>

#include "panosum/blend.hpp"
#include "panosum/homography.hpp"
#include "panosum/image.hpp"

namespace panosum::stitch {

struct StitchConfig {
  bool cylindrical = true;
  int blend_levels = 4;
  double ransac_threshold_px = 3.0;
  int ransac_max_iters = 2000;
  int min_edge_inliers = 15;
  int all_pairs_limit = 8;  // above this, fan out to nearest-by-affinity
  int pair_fanout = 4;
  int fast_threshold = 20;
  int max_keypoints = 1500;
  double match_ratio = 0.8;
  bool subpixel_refine = true;
  double gain_lambda = 0.01;
  std::uint64_t seed = 0;
};

struct PairwiseMatchResult {
  int id_a = 0;
  int id_b = 0;
  Eigen::Matrix3d h_ab = Eigen::Matrix3d::Identity();  // maps a coords to b coords
  int inliers = 0;
};

struct AlignmentTree {
  int reference = 0;
  std::vector<int> image_ids;                     // component members, ascending
  std::vector<std::pair<int, int>> edges;         // tree edges as (min, max)
  std::map<int, Eigen::Matrix3d> transforms;      // image id -> to-reference transform
};

/// Keeps edges with >= min_edge_inliers, takes the maximum spanning tree per
/// connected component (ties by lower (min,max) id pair), picks the member
/// with the highest total incident inlier count as reference (ties by lower
/// id), and composes per-image transforms along tree paths. Components are
/// ordered by their smallest member id; isolated images form singleton trees.
std::vector<AlignmentTree> build_alignment_tree(const std::vector<int>& image_ids,
                                                const std::vector<PairwiseMatchResult>& pairwise,
                                                int min_edge_inliers = 15);

struct Panorama {
  io::Image canvas;
  double origin_x = 0;  // reference-frame coordinates of canvas pixel (0,0)
  double origin_y = 0;
  std::vector<int> keyframe_ids;  // contributing members, ascending
  int cluster_id = 0;
  int component = 0;
};

/// Full per-cluster stitch: optional cylindrical pre-warp (f = fx), feature
/// matching over selected pairs, RANSAC homographies, alignment trees, and
/// per-component gain compensation + feathered multiband blending. Singleton
/// components emit the raw keyframe image. `member_affinity`, when given, is
/// the cluster's affinity submatrix (member order) used to pick match pairs
/// for clusters above all_pairs_limit; pass nullptr to match all pairs.
std::vector<Panorama> stitch_cluster(int cluster_id,
                                     const std::vector<int>& member_keyframe_ids,
                                     const std::vector<io::Image>& member_images,
                                     const io::CameraIntrinsics& intrinsics,
                                     const Eigen::MatrixXd* member_affinity,
                                     const StitchConfig& config);

}  // namespace panosum::stitch
