#pragma once

#include <numbers>
#include <vector>

#include <Eigen/Core>

#include "panosum/visual_odometry.hpp"

namespace panosum::cluster {

/// Symmetric keyframe-similarity graph; entries in [0,1], zero diagonal.
struct AffinityGraph {
  int n = 0;
  Eigen::MatrixXd A;
  std::vector<int> node_ids;  // keyframe ids, row/column order
  double scene_scale = 1.0;
};

struct AffinityParams {
  double sigma_pos = 0.5;  // in scene-scale units
  double sigma_rot = std::numbers::pi / 3.0;
};

/// w = exp(-(d_pos/(sigma_pos*scene_scale))^2) * exp(-(d_rot/sigma_rot)^2)
/// with d_pos the center distance and d_rot the geodesic rotation angle.
double pose_affinity(const vo::Pose& a, const vo::Pose& b, double sigma_pos,
                     double sigma_rot, double scene_scale);

/// Pose graph over keyframes, all of which must carry poses (MissingPose
/// otherwise). scene_scale = median center distance to the centroid, 1.0 for
/// fewer than 3 keyframes or a degenerate (coincident) configuration.
AffinityGraph build_affinity_graph(const std::vector<vo::Keyframe>& keyframes,
                                   const AffinityParams& params);

/// Appearance fallback when poses are absent: affinity = cross-checked match
/// count between descriptor sets, normalized by the smaller keypoint count.
AffinityGraph build_appearance_graph(const std::vector<vo::Keyframe>& keyframes,
                                     double match_ratio = 0.8);

struct ReplicatorState {
  Eigen::VectorXd x;
  double payoff = 0;  // x^T A x at the returned state
  int iterations = 0;
  bool converged = false;
};

/// x_i <- x_i (Ax)_i / (x^T A x), renormalized each step, until the L1 step
/// drops below tol or max_iters is hit. Zero payoff returns x unchanged.
ReplicatorState replicator_dynamics(const Eigen::MatrixXd& A, const Eigen::VectorXd& x0,
                                    double tol = 1e-8, int max_iters = 10000);

struct Cluster {
  int id = 0;
  std::vector<int> members;        // node ids, ascending
  std::vector<double> characteristic;  // converged x* over members
  double cohesiveness = 0;
};

struct DomsetParams {
  double support_delta = 1e-4;
  /// Cohesiveness floor, relative to the largest affinity entry so that
  /// scaling A by a constant cannot change memberships.
  double cohesiveness_min = 0.05;
  int min_cluster_size = 2;
  double tol = 1e-8;
  int max_iters = 10000;
};

struct DomsetResult {
  std::vector<Cluster> clusters;
  std::vector<int> unassigned;  // node ids, ascending
};

/// Peel-off dominant sets: replicator from the barycenter of the remaining
/// nodes, support at x_i > delta, stop when fewer than min_cluster_size nodes
/// remain or the candidate's cohesiveness falls below the floor.
DomsetResult extract_dominant_sets(const AffinityGraph& graph, const DomsetParams& params);

}  // namespace panosum::cluster
