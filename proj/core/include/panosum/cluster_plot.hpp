#pragma once

#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace panosum::plot {

struct PlotPoint {
  int keyframe_id = 0;
  bool has_center = false;
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
};

/// Scatter of keyframe camera centers colored by cluster membership.
/// When every keyframe has a center (and there are at least two), centers are
/// projected onto their first two principal components; otherwise the circles
/// fall back to a grid ordered by keyframe id. Unclustered keyframes draw
/// gray. Output is byte-stable for equal inputs.
std::string render_cluster_plot(const std::vector<PlotPoint>& keyframes,
                                const std::vector<std::pair<int, std::vector<int>>>& clusters);

void write_cluster_plot(const std::vector<PlotPoint>& keyframes,
                        const std::vector<std::pair<int, std::vector<int>>>& clusters,
                        const std::string& path);

}  // namespace panosum::plot
