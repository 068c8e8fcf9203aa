#include "panosum/cluster_plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

#include <Eigen/Dense>

#include "panosum/errors.hpp"

namespace panosum::plot {
namespace {

const char* kPalette[12] = {"#e6194b", "#3cb44b", "#ffe119", "#4363d8", "#f58231", "#911eb4",
                            "#46f0f0", "#f032e6", "#bcf60c", "#fabebe", "#008080", "#e6beff"};
const char* kGray = "#999999";

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

}  // namespace

std::string render_cluster_plot(const std::vector<PlotPoint>& keyframes,
                                const std::vector<std::pair<int, std::vector<int>>>& clusters) {
  if (keyframes.empty()) throw InvalidValue("render_cluster_plot: no keyframes");

  std::map<int, int> cluster_of;
  std::vector<std::pair<int, std::vector<int>>> sorted_clusters = clusters;
  std::sort(sorted_clusters.begin(), sorted_clusters.end());
  for (const auto& [cid, members] : sorted_clusters)
    for (int kf : members) cluster_of[kf] = cid;

  const int n = static_cast<int>(keyframes.size());
  const bool all_posed =
      std::all_of(keyframes.begin(), keyframes.end(), [](const PlotPoint& p) { return p.has_center; });

  std::vector<double> xs(n), ys(n);
  if (all_posed && n >= 2) {
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    for (const auto& p : keyframes) mean += p.center;
    mean /= n;
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (const auto& p : keyframes) {
      const Eigen::Vector3d d = p.center - mean;
      cov += d * d.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
    Eigen::Vector3d pc1 = eig.eigenvectors().col(2);  // eigenvalues ascend
    Eigen::Vector3d pc2 = eig.eigenvectors().col(1);
    // Fix the sign so the dominant entry is positive; keeps orientation stable.
    auto fix_sign = [](Eigen::Vector3d& v) {
      int arg = 0;
      v.cwiseAbs().maxCoeff(&arg);
      if (v[arg] < 0) v = -v;
    };
    fix_sign(pc1);
    fix_sign(pc2);
    for (int i = 0; i < n; ++i) {
      const Eigen::Vector3d d = keyframes[i].center - mean;
      xs[i] = pc1.dot(d);
      ys[i] = pc2.dot(d);
    }
  } else {
    const int cols = std::max(1, static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n)))));
    for (int i = 0; i < n; ++i) {
      xs[i] = i % cols;
      ys[i] = i / cols;
    }
  }

  double min_x = xs[0], max_x = xs[0], min_y = ys[0], max_y = ys[0];
  for (int i = 1; i < n; ++i) {
    min_x = std::min(min_x, xs[i]);
    max_x = std::max(max_x, xs[i]);
    min_y = std::min(min_y, ys[i]);
    max_y = std::max(max_y, ys[i]);
  }
  const double span_x = (max_x - min_x > 1e-12) ? max_x - min_x : 1.0;
  const double span_y = (max_y - min_y > 1e-12) ? max_y - min_y : 1.0;

  const double margin = 40.0;
  const double plot_w = 520.0;
  const double plot_h = 400.0;
  const double legend_x = margin + plot_w + 30.0;
  const int legend_rows = static_cast<int>(sorted_clusters.size()) +
                          (static_cast<int>(cluster_of.size()) < n ? 1 : 0);
  const double height = std::max(plot_h + 2 * margin, 2 * margin + legend_rows * 22.0);
  const double width = legend_x + 130.0;

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(width) + "\" height=\"" +
         fmt(height) + "\" viewBox=\"0 0 " + fmt(width) + " " + fmt(height) + "\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
  svg += "<rect x=\"" + fmt(margin) + "\" y=\"" + fmt(margin) + "\" width=\"" + fmt(plot_w) +
         "\" height=\"" + fmt(plot_h) + "\" fill=\"none\" stroke=\"#cccccc\"/>\n";

  for (int i = 0; i < n; ++i) {
    const double px = margin + 10.0 + (xs[i] - min_x) / span_x * (plot_w - 20.0);
    // SVG y grows downward; flip so larger PCA y plots higher.
    const double py = margin + 10.0 + (max_y - ys[i]) / span_y * (plot_h - 20.0);
    const auto it = cluster_of.find(keyframes[i].keyframe_id);
    const char* color = (it == cluster_of.end()) ? kGray : kPalette[it->second % 12];
    svg += "<circle cx=\"" + fmt(px) + "\" cy=\"" + fmt(py) + "\" r=\"5\" fill=\"" + color +
           "\" stroke=\"#333333\" stroke-width=\"1\"><title>keyframe " +
           std::to_string(keyframes[i].keyframe_id) + "</title></circle>\n";
  }

  double ly = margin;
  for (const auto& [cid, members] : sorted_clusters) {
    svg += "<rect x=\"" + fmt(legend_x) + "\" y=\"" + fmt(ly) + "\" width=\"14\" height=\"14\" fill=\"" +
           kPalette[cid % 12] + "\" stroke=\"#333333\"/>\n";
    svg += "<text x=\"" + fmt(legend_x + 20.0) + "\" y=\"" + fmt(ly + 12.0) +
           "\" font-family=\"sans-serif\" font-size=\"13\">cluster " + std::to_string(cid) +
           " (" + std::to_string(members.size()) + ")</text>\n";
    ly += 22.0;
  }
  if (static_cast<int>(cluster_of.size()) < n) {
    svg += "<rect x=\"" + fmt(legend_x) + "\" y=\"" + fmt(ly) + "\" width=\"14\" height=\"14\" fill=\"" +
           std::string(kGray) + "\" stroke=\"#333333\"/>\n";
    svg += "<text x=\"" + fmt(legend_x + 20.0) + "\" y=\"" + fmt(ly + 12.0) +
           "\" font-family=\"sans-serif\" font-size=\"13\">unassigned</text>\n";
  }

  svg += "</svg>\n";
  return svg;
}

void write_cluster_plot(const std::vector<PlotPoint>& keyframes,
                        const std::vector<std::pair<int, std::vector<int>>>& clusters,
                        const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open plot file for writing: " + path);
  const std::string svg = render_cluster_plot(keyframes, clusters);
  out.write(svg.data(), static_cast<std::streamsize>(svg.size()));
  if (!out) throw IoError("short write on plot file: " + path);
}

}  // namespace panosum::plot
