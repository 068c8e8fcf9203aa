#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "panosum/errors.hpp"
#include "panosum/pipeline.hpp"

namespace {

using panosum::pipeline::PipelineConfig;

void apply_config_file(PipelineConfig& cfg, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw panosum::IoError("cannot open config file: " + path);
  const nlohmann::json j = nlohmann::json::parse(in);
  if (!j.is_object()) throw panosum::InvalidValue("config file must hold a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key == "frames_dir") cfg.frames_dir = value.get<std::string>();
    else if (key == "intrinsics_path") cfg.intrinsics_path = value.get<std::string>();
    else if (key == "output_dir") cfg.output_dir = value.get<std::string>();
    else if (key == "seed") cfg.seed = value.get<std::uint64_t>();
    else if (key == "tau_d") cfg.tau_d = value.get<double>();
    else if (key == "tau_r") cfg.tau_r = value.get<double>();
    else if (key == "n_max") cfg.n_max = value.get<int>();
    else if (key == "sigma_pos") cfg.sigma_pos = value.get<double>();
    else if (key == "sigma_rot") cfg.sigma_rot = value.get<double>();
    else if (key == "support_delta") cfg.support_delta = value.get<double>();
    else if (key == "cohesiveness_min") cfg.cohesiveness_min = value.get<double>();
    else if (key == "min_cluster_size") cfg.min_cluster_size = value.get<int>();
    else if (key == "cylindrical") cfg.cylindrical = value.get<bool>();
    else if (key == "blend_levels") cfg.blend_levels = value.get<int>();
    else if (key == "ransac_essential_px") cfg.ransac_essential_px = value.get<double>();
    else if (key == "ransac_pnp_px") cfg.ransac_pnp_px = value.get<double>();
    else if (key == "ransac_homography_px") cfg.ransac_homography_px = value.get<double>();
    else if (key == "jobs") cfg.jobs = value.get<int>();
    else if (key == "report_timings") cfg.report_timings = value.get<bool>();
    else throw panosum::InvalidValue("unknown config key: " + key);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"panosum: panoramic scene summaries from frame sequences"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run the full pipeline on a frame directory");
  std::string frames_dir, intrinsics_path, output_dir, config_path;
  run->add_option("--frames", frames_dir, "Directory of input frames (.png/.ppm/.pgm)")->required();
  run->add_option("--intrinsics", intrinsics_path, "JSON file with fx, fy, cx, cy")->required();
  run->add_option("--out", output_dir, "Output directory (replaced on success)")->required();
  run->add_option("--config", config_path, "JSON config file; explicit flags override it");

  std::uint64_t seed = 0;
  double tau_d = 0, tau_r = 0, sigma_pos = 0, sigma_rot = 0, support_delta = 0, cohesiveness_min = 0;
  double ransac_essential_px = 0, ransac_pnp_px = 0, ransac_homography_px = 0;
  int n_max = 0, min_cluster_size = 0, blend_levels = 0, jobs = 0;
  run->add_option("--seed", seed, "RNG seed (default 0)");
  run->add_option("--tau-d", tau_d, "Keyframe median-displacement threshold, px");
  run->add_option("--tau-r", tau_r, "Keyframe tracked-fraction threshold");
  run->add_option("--n-max", n_max, "Max frames between keyframes");
  run->add_option("--sigma-pos", sigma_pos, "Affinity position bandwidth, scene-scale units");
  run->add_option("--sigma-rot", sigma_rot, "Affinity rotation bandwidth, radians");
  run->add_option("--support-delta", support_delta, "Dominant-set support threshold");
  run->add_option("--cohesiveness-min", cohesiveness_min, "Relative cluster cohesiveness floor");
  run->add_option("--min-cluster-size", min_cluster_size, "Smallest reported cluster");
  run->add_option("--blend-levels", blend_levels, "Multiband blending pyramid levels");
  run->add_option("--ransac-essential-px", ransac_essential_px, "Essential RANSAC threshold, px");
  run->add_option("--ransac-pnp-px", ransac_pnp_px, "PnP RANSAC threshold, px");
  run->add_option("--ransac-homography-px", ransac_homography_px, "Homography RANSAC threshold, px");
  run->add_option("--jobs", jobs, "Concurrent cluster stitches (0 = CPU count)");
  bool no_cylindrical = false, report_timings = false;
  run->add_flag("--no-cylindrical", no_cylindrical, "Stitch on flat images, skip cylindrical pre-warp");
  run->add_flag("--report-timings", report_timings, "Record measured phase timings in the report");

  CLI11_PARSE(app, argc, argv);

  try {
    PipelineConfig cfg;
    if (run->count("--config")) apply_config_file(cfg, config_path);
    cfg.frames_dir = frames_dir;
    cfg.intrinsics_path = intrinsics_path;
    cfg.output_dir = output_dir;
    if (run->count("--seed")) cfg.seed = seed;
    if (run->count("--tau-d")) cfg.tau_d = tau_d;
    if (run->count("--tau-r")) cfg.tau_r = tau_r;
    if (run->count("--n-max")) cfg.n_max = n_max;
    if (run->count("--sigma-pos")) cfg.sigma_pos = sigma_pos;
    if (run->count("--sigma-rot")) cfg.sigma_rot = sigma_rot;
    if (run->count("--support-delta")) cfg.support_delta = support_delta;
    if (run->count("--cohesiveness-min")) cfg.cohesiveness_min = cohesiveness_min;
    if (run->count("--min-cluster-size")) cfg.min_cluster_size = min_cluster_size;
    if (run->count("--blend-levels")) cfg.blend_levels = blend_levels;
    if (run->count("--ransac-essential-px")) cfg.ransac_essential_px = ransac_essential_px;
    if (run->count("--ransac-pnp-px")) cfg.ransac_pnp_px = ransac_pnp_px;
    if (run->count("--ransac-homography-px")) cfg.ransac_homography_px = ransac_homography_px;
    if (run->count("--jobs")) cfg.jobs = jobs;
    if (no_cylindrical) cfg.cylindrical = false;
    if (report_timings) cfg.report_timings = true;

    const panosum::report::RunReport report = panosum::pipeline::run_pipeline(cfg);

    std::size_t panoramas = 0;
    for (const auto& c : report.clusters) panoramas += c.panoramas.size();
    std::cout << "keyframes: " << report.keyframes.size() << ", clusters: " << report.clusters.size()
              << ", panoramas: " << panoramas << ", unassigned: " << report.unassigned.size()
              << (report.vo_initialized ? "" : " (odometry uninitialized)") << "\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
