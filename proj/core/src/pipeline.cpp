#include "panosum/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <filesystem>
#include <map>
#include <thread>
#include <type_traits>
#include <utility>
#include <vector>

#include "panosum/cluster_plot.hpp"
#include "panosum/dominant_sets.hpp"
#include "panosum/errors.hpp"
#include "panosum/image_io.hpp"
#include "panosum/stitcher.hpp"
#include "panosum/visual_odometry.hpp"

namespace fs = std::filesystem;

namespace panosum::pipeline {
namespace {

class PhaseTimer {
 public:
  explicit PhaseTimer(bool enabled) : enabled_(enabled) {}

  template <typename F>
  auto time(const std::string& phase, F&& f) {
    const auto start = std::chrono::steady_clock::now();
    if constexpr (std::is_void_v<decltype(f())>) {
      f();
      record(phase, start);
    } else {
      auto result = f();
      record(phase, start);
      return result;
    }
  }

  std::map<std::string, double> timings() const { return timings_; }

 private:
  void record(const std::string& phase, std::chrono::steady_clock::time_point start) {
    double ms = 0.0;
    if (enabled_) {
      const auto end = std::chrono::steady_clock::now();
      ms = std::chrono::duration<double, std::milli>(end - start).count();
    }
    timings_[phase] = ms;
  }

  bool enabled_;
  std::map<std::string, double> timings_;
};

struct ClusterOutput {
  cluster::Cluster cluster;
  std::vector<stitch::Panorama> panoramas;
};

}  // namespace

void validate(const PipelineConfig& config) {
  if (config.frames_dir.empty()) throw InvalidValue("frames_dir is required");
  if (config.intrinsics_path.empty()) throw InvalidValue("intrinsics_path is required");
  if (config.output_dir.empty()) throw InvalidValue("output_dir is required");
  if (config.tau_d <= 0) throw InvalidValue("tau_d must be positive");
  if (config.tau_r <= 0) throw InvalidValue("tau_r must be positive");
  if (config.n_max <= 0) throw InvalidValue("n_max must be positive");
  if (config.sigma_pos <= 0) throw InvalidValue("sigma_pos must be positive");
  if (config.sigma_rot <= 0) throw InvalidValue("sigma_rot must be positive");
  if (config.support_delta <= 0) throw InvalidValue("support_delta must be positive");
  if (config.cohesiveness_min <= 0) throw InvalidValue("cohesiveness_min must be positive");
  if (config.min_cluster_size < 1) throw InvalidValue("min_cluster_size must be at least 1");
  if (config.blend_levels < 1) throw InvalidValue("blend_levels must be at least 1");
  if (config.ransac_essential_px <= 0) throw InvalidValue("ransac_essential_px must be positive");
  if (config.ransac_pnp_px <= 0) throw InvalidValue("ransac_pnp_px must be positive");
  if (config.ransac_homography_px <= 0) throw InvalidValue("ransac_homography_px must be positive");
  if (config.jobs < 0) throw InvalidValue("jobs must be nonnegative");
}

report::Json config_to_json(const PipelineConfig& config) {
  report::Json j = report::Json::object();
  j["frames_dir"] = report::Json::string(config.frames_dir);
  j["intrinsics_path"] = report::Json::string(config.intrinsics_path);
  j["output_dir"] = report::Json::string(config.output_dir);
  j["seed"] = report::Json::uinteger(config.seed);
  j["tau_d"] = report::Json::number(config.tau_d);
  j["tau_r"] = report::Json::number(config.tau_r);
  j["n_max"] = report::Json::integer(config.n_max);
  j["sigma_pos"] = report::Json::number(config.sigma_pos);
  j["sigma_rot"] = report::Json::number(config.sigma_rot);
  j["support_delta"] = report::Json::number(config.support_delta);
  j["cohesiveness_min"] = report::Json::number(config.cohesiveness_min);
  j["min_cluster_size"] = report::Json::integer(config.min_cluster_size);
  j["cylindrical"] = report::Json::boolean(config.cylindrical);
  j["blend_levels"] = report::Json::integer(config.blend_levels);
  j["ransac_essential_px"] = report::Json::number(config.ransac_essential_px);
  j["ransac_pnp_px"] = report::Json::number(config.ransac_pnp_px);
  j["ransac_homography_px"] = report::Json::number(config.ransac_homography_px);
  j["jobs"] = report::Json::integer(config.jobs);
  j["report_timings"] = report::Json::boolean(config.report_timings);
  return j;
}

report::RunReport run_pipeline(const PipelineConfig& config) {
  validate(config);
  PhaseTimer timer(config.report_timings);

  const std::vector<io::Frame> frames =
      timer.time("load", [&] { return io::load_frame_sequence(config.frames_dir); });
  const io::CameraIntrinsics intrinsics = io::load_intrinsics(config.intrinsics_path);

  vo::VoConfig vo_config;
  vo_config.keyframe = {config.tau_d, config.tau_r, config.n_max};
  vo_config.essential_threshold_px = config.ransac_essential_px;
  vo_config.pnp_threshold_px = config.ransac_pnp_px;
  vo_config.seed = config.seed;
  const vo::VoResult vo_result =
      timer.time("vo", [&] { return vo::run_vo(frames, intrinsics, vo_config); });

  // Clustering runs over posed keyframes; with no poses at all (odometry
  // never initialized) it falls back to appearance affinity over everything.
  cluster::AffinityGraph graph;
  std::vector<int> graphless;  // keyframes outside the graph, always unassigned
  cluster::DomsetResult domset;
  timer.time("clustering", [&] {
    std::vector<vo::Keyframe> posed;
    for (const auto& kf : vo_result.keyframes) {
      if (kf.pose.has_value())
        posed.push_back(kf);
      else
        graphless.push_back(kf.id);
    }
    if (!posed.empty()) {
      cluster::AffinityParams params{config.sigma_pos, config.sigma_rot};
      graph = cluster::build_affinity_graph(posed, params);
    } else if (!vo_result.keyframes.empty()) {
      graphless.clear();
      graph = cluster::build_appearance_graph(vo_result.keyframes, vo_config.match_ratio);
    }
    cluster::DomsetParams params;
    params.support_delta = config.support_delta;
    params.cohesiveness_min = config.cohesiveness_min;
    params.min_cluster_size = config.min_cluster_size;
    domset = cluster::extract_dominant_sets(graph, params);
  });

  std::map<int, const vo::Keyframe*> keyframe_of;
  for (const auto& kf : vo_result.keyframes) keyframe_of[kf.id] = &kf;
  std::map<int, int> graph_row;
  for (std::size_t i = 0; i < graph.node_ids.size(); ++i)
    graph_row[graph.node_ids[i]] = static_cast<int>(i);

  std::vector<ClusterOutput> outputs(domset.clusters.size());
  timer.time("stitching", [&] {
    stitch::StitchConfig stitch_config;
    stitch_config.cylindrical = config.cylindrical;
    stitch_config.blend_levels = config.blend_levels;
    stitch_config.ransac_threshold_px = config.ransac_homography_px;
    stitch_config.seed = config.seed;

    std::vector<std::pair<std::vector<io::Image>, Eigen::MatrixXd>> inputs;
    for (std::size_t c = 0; c < domset.clusters.size(); ++c) {
      outputs[c].cluster = domset.clusters[c];
      const auto& members = domset.clusters[c].members;
      std::vector<io::Image> images;
      Eigen::MatrixXd affinity(members.size(), members.size());
      for (std::size_t i = 0; i < members.size(); ++i) {
        images.push_back(frames[keyframe_of.at(members[i])->frame_index].image);
        for (std::size_t j = 0; j < members.size(); ++j)
          affinity(i, j) = graph.A(graph_row.at(members[i]), graph_row.at(members[j]));
      }
      inputs.emplace_back(std::move(images), std::move(affinity));
    }

    const unsigned hw = std::thread::hardware_concurrency();
    int jobs = config.jobs > 0 ? config.jobs : (hw > 0 ? static_cast<int>(hw) : 1);
    jobs = std::max(1, std::min<int>(jobs, static_cast<int>(domset.clusters.size())));

    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> failures(static_cast<std::size_t>(jobs));
    auto worker = [&](int slot) {
      try {
        for (std::size_t c = next.fetch_add(1); c < outputs.size(); c = next.fetch_add(1)) {
          outputs[c].panoramas = stitch::stitch_cluster(
              outputs[c].cluster.id, outputs[c].cluster.members, inputs[c].first, intrinsics,
              &inputs[c].second, stitch_config);
        }
      } catch (...) {
        failures[static_cast<std::size_t>(slot)] = std::current_exception();
      }
    };
    if (jobs == 1) {
      worker(0);
    } else {
      std::vector<std::thread> pool;
      for (int s = 0; s < jobs; ++s) pool.emplace_back(worker, s);
      for (auto& t : pool) t.join();
    }
    for (const auto& failure : failures)
      if (failure) std::rethrow_exception(failure);
  });

  report::RunReport result;
  result.config = config_to_json(config);
  for (const auto& kf : vo_result.keyframes) {
    report::KeyframeEntry entry;
    entry.id = kf.id;
    entry.frame_index = kf.frame_index;
    entry.has_pose = kf.pose.has_value();
    if (entry.has_pose) {
      const Eigen::Vector4d q = vo::to_quaternion_wxyz(kf.pose->R);
      entry.q = {q[0], q[1], q[2], q[3]};
      entry.t = {kf.pose->t.x(), kf.pose->t.y(), kf.pose->t.z()};
    }
    result.keyframes.push_back(entry);
  }

  for (const auto& out : outputs) {
    report::ClusterEntry entry;
    entry.id = out.cluster.id;
    entry.members = out.cluster.members;
    entry.cohesiveness = out.cluster.cohesiveness;
    for (const auto& pano : out.panoramas)
      entry.panoramas.push_back("panorama_" + std::to_string(pano.cluster_id) + "_" +
                                std::to_string(pano.component) + ".png");
    result.clusters.push_back(std::move(entry));
  }

  result.unassigned = domset.unassigned;
  result.unassigned.insert(result.unassigned.end(), graphless.begin(), graphless.end());
  std::sort(result.unassigned.begin(), result.unassigned.end());
  result.timings_ms = timer.timings();
  result.map_points = static_cast<int>(vo_result.map_points.size());
  result.vo_initialized = vo_result.diagnostics.initialized;

  // Stage everything, then move into place so interrupted runs leave nothing
  // at the published path.
  const fs::path final_dir(config.output_dir);
  const fs::path temp_dir(config.output_dir + ".partial");
  std::error_code ec;
  fs::remove_all(temp_dir, ec);
  fs::create_directories(temp_dir);
  if (!fs::is_directory(temp_dir)) throw IoError("cannot create staging directory: " + temp_dir.string());

  try {
    for (const auto& out : outputs)
      for (const auto& pano : out.panoramas)
        io::write_image_file((temp_dir / ("panorama_" + std::to_string(pano.cluster_id) + "_" +
                                          std::to_string(pano.component) + ".png"))
                                 .string(),
                             pano.canvas, io::ImageFormat::PNG);
    for (int id : result.unassigned)
      io::write_image_file((temp_dir / ("unassigned_" + std::to_string(id) + ".png")).string(),
                           frames[keyframe_of.at(id)->frame_index].image, io::ImageFormat::PNG);

    report::write_report(result, (temp_dir / "report.json").string());

    std::vector<plot::PlotPoint> points;
    for (const auto& kf : vo_result.keyframes) {
      plot::PlotPoint p;
      p.keyframe_id = kf.id;
      p.has_center = kf.pose.has_value();
      if (p.has_center) p.center = kf.pose->center();
      points.push_back(p);
    }
    std::vector<std::pair<int, std::vector<int>>> plot_clusters;
    for (const auto& entry : result.clusters) plot_clusters.emplace_back(entry.id, entry.members);
    plot::write_cluster_plot(points, plot_clusters, (temp_dir / "clusters.svg").string());

    if (fs::exists(final_dir)) fs::remove_all(final_dir);
    fs::rename(temp_dir, final_dir);
  } catch (...) {
    fs::remove_all(temp_dir, ec);
    throw;
  }
  return result;
}

}  // namespace panosum::pipeline
