#include "panosum/dominant_sets.hpp"

#include <algorithm>
#include <cmath>

#include "panosum/errors.hpp"

namespace panosum::cluster {

double pose_affinity(const vo::Pose& a, const vo::Pose& b, double sigma_pos,
                     double sigma_rot, double scene_scale) {
  if (!(sigma_pos > 0) || !(sigma_rot > 0) || !(scene_scale > 0)) {
    throw InvalidValue("pose_affinity: sigmas and scene_scale must be positive");
  }
  const double d_pos = (a.center() - b.center()).norm() / (sigma_pos * scene_scale);
  const double d_rot = vo::rotation_angle_between(a.R, b.R) / sigma_rot;
  return std::exp(-d_pos * d_pos) * std::exp(-d_rot * d_rot);
}

AffinityGraph build_affinity_graph(const std::vector<vo::Keyframe>& keyframes,
                                   const AffinityParams& params) {
  if (keyframes.empty()) throw InvalidValue("build_affinity_graph: no keyframes");
  const int n = static_cast<int>(keyframes.size());
  for (const auto& kf : keyframes) {
    if (!kf.pose) {
      throw MissingPose("build_affinity_graph: keyframe " + std::to_string(kf.id) +
                        " has no pose");
    }
  }

  AffinityGraph g;
  g.n = n;
  g.node_ids.reserve(keyframes.size());
  for (const auto& kf : keyframes) g.node_ids.push_back(kf.id);

  double scene_scale = 1.0;
  if (n >= 3) {
    Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
    for (const auto& kf : keyframes) centroid += kf.pose->center();
    centroid /= static_cast<double>(n);
    std::vector<double> dists;
    dists.reserve(keyframes.size());
    for (const auto& kf : keyframes) dists.push_back((kf.pose->center() - centroid).norm());
    std::sort(dists.begin(), dists.end());
    const std::size_t m = dists.size();
    const double median = m % 2 == 1 ? dists[m / 2] : 0.5 * (dists[m / 2 - 1] + dists[m / 2]);
    if (median > 1e-12) scene_scale = median;
  }
  g.scene_scale = scene_scale;

  g.A = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double w =
          pose_affinity(*keyframes[static_cast<std::size_t>(i)].pose,
                        *keyframes[static_cast<std::size_t>(j)].pose, params.sigma_pos,
                        params.sigma_rot, scene_scale);
      g.A(i, j) = w;
      g.A(j, i) = w;
    }
  }
  return g;
}

AffinityGraph build_appearance_graph(const std::vector<vo::Keyframe>& keyframes,
                                     double match_ratio) {
  if (keyframes.empty()) throw InvalidValue("build_appearance_graph: no keyframes");
  const int n = static_cast<int>(keyframes.size());
  AffinityGraph g;
  g.n = n;
  g.A = Eigen::MatrixXd::Zero(n, n);
  for (const auto& kf : keyframes) g.node_ids.push_back(kf.id);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const auto& a = keyframes[static_cast<std::size_t>(i)];
      const auto& b = keyframes[static_cast<std::size_t>(j)];
      const std::size_t denom = std::min(a.keypoints.size(), b.keypoints.size());
      double w = 0;
      if (denom > 0) {
        const auto matches =
            features::match_descriptors(a.descriptors, b.descriptors, match_ratio, true);
        w = std::min(1.0, static_cast<double>(matches.size()) / static_cast<double>(denom));
      }
      g.A(i, j) = w;
      g.A(j, i) = w;
    }
  }
  return g;
}

ReplicatorState replicator_dynamics(const Eigen::MatrixXd& A, const Eigen::VectorXd& x0,
                                    double tol, int max_iters) {
  if (A.rows() != A.cols() || A.rows() != x0.size()) {
    throw DimensionMismatch("replicator_dynamics: A and x0 sizes disagree");
  }
  ReplicatorState st;
  st.x = x0;
  const double sum0 = st.x.sum();
  if (sum0 > 0 && std::abs(sum0 - 1.0) > 1e-12) st.x /= sum0;

  for (int iter = 0; iter < max_iters; ++iter) {
    const Eigen::VectorXd ax = A * st.x;
    const double payoff = st.x.dot(ax);
    if (payoff <= 0) {
      st.payoff = 0;
      st.iterations = iter;
      st.converged = true;
      return st;
    }
    Eigen::VectorXd next = st.x.cwiseProduct(ax) / payoff;
    const double s = next.sum();
    if (s > 0) next /= s;
    const double step = (next - st.x).lpNorm<1>();
    st.x = std::move(next);
    st.iterations = iter + 1;
    if (step < tol) {
      st.converged = true;
      break;
    }
  }
  st.payoff = st.x.dot(A * st.x);
  return st;
}

namespace {
constexpr double kBarycenterBias = 1e-6;
}  // namespace

DomsetResult extract_dominant_sets(const AffinityGraph& graph, const DomsetParams& params) {
  DomsetResult out;
  const int n = graph.n;
  if (n == 0) return out;

  const double norm = graph.A.maxCoeff();
  std::vector<int> remaining(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) remaining[static_cast<std::size_t>(i)] = i;

  if (norm > 0) {
    while (static_cast<int>(remaining.size()) >= params.min_cluster_size) {
      const int m = static_cast<int>(remaining.size());
      Eigen::MatrixXd sub(m, m);
      for (int i = 0; i < m; ++i) {
        for (int j = 0; j < m; ++j) {
          sub(i, j) = graph.A(remaining[static_cast<std::size_t>(i)],
                              remaining[static_cast<std::size_t>(j)]);
        }
      }
      // The exact barycenter is a fixed point whenever all weighted degrees
      // tie (two identical cliques, say), so bias it by a tiny deterministic
      // ramp. The bias decays wherever the barycenter is a real attractor.
      Eigen::VectorXd x0(m);
      for (int i = 0; i < m; ++i) {
        x0(i) = 1.0 + kBarycenterBias * static_cast<double>(m - i) / static_cast<double>(m);
      }
      x0 /= x0.sum();
      const ReplicatorState st = replicator_dynamics(sub, x0, params.tol, params.max_iters);

      std::vector<int> support;     // positions within `remaining`
      for (int i = 0; i < m; ++i) {
        if (st.x(i) > params.support_delta) support.push_back(i);
      }
      if (support.empty() || st.payoff < params.cohesiveness_min * norm) break;

      Cluster c;
      c.id = static_cast<int>(out.clusters.size());
      c.cohesiveness = st.payoff;
      for (int pos : support) {
        c.members.push_back(
            graph.node_ids[static_cast<std::size_t>(remaining[static_cast<std::size_t>(pos)])]);
        c.characteristic.push_back(st.x(pos));
      }
      out.clusters.push_back(std::move(c));

      std::vector<int> next;
      std::size_t sp = 0;
      for (int i = 0; i < m; ++i) {
        if (sp < support.size() && support[sp] == i) {
          ++sp;
        } else {
          next.push_back(remaining[static_cast<std::size_t>(i)]);
        }
      }
      remaining = std::move(next);
    }
  }

  for (int idx : remaining) {
    out.unassigned.push_back(graph.node_ids[static_cast<std::size_t>(idx)]);
  }
  std::sort(out.unassigned.begin(), out.unassigned.end());
  return out;
}

}  // namespace panosum::cluster
