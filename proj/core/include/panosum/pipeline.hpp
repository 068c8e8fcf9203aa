#pragma once

#include <cstdint>
#include <numbers>
#include <string>

#include "panosum/report.hpp"

namespace panosum::pipeline {

/// Effective run configuration. Field names double as the JSON config-file
/// keys and (dashed) CLI flag names. Defaults mirror the owning modules.
struct PipelineConfig {
  std::string frames_dir;
  std::string intrinsics_path;
  std::string output_dir;
  std::uint64_t seed = 0;

  // keyframe policy
  double tau_d = 12.0;
  double tau_r = 0.6;
  int n_max = 30;

  // clustering
  double sigma_pos = 0.5;
  double sigma_rot = std::numbers::pi / 3.0;
  double support_delta = 1e-4;
  double cohesiveness_min = 0.05;
  int min_cluster_size = 2;

  // stitching
  bool cylindrical = true;
  int blend_levels = 4;
  double ransac_essential_px = 1.0;
  double ransac_pnp_px = 2.0;
  double ransac_homography_px = 3.0;

  int jobs = 0;  // 0: use the logical CPU count
  /// Timings in the report are zeros unless set, keeping default runs
  /// byte-identical regardless of machine speed.
  bool report_timings = false;
};

/// Throws InvalidValue on nonpositive thresholds or missing paths.
void validate(const PipelineConfig& config);

report::Json config_to_json(const PipelineConfig& config);

/// Full offline run: load -> visual odometry -> affinity graph -> dominant
/// sets -> per-cluster stitching -> outputs. Products are staged in
/// `<output_dir>.partial` and renamed into place only on success, so failed
/// runs leave no partial output directory behind. An existing output
/// directory is replaced. Throws on I/O failures and empty sequences;
/// odometry initialization failure degrades to appearance-only clustering.
report::RunReport run_pipeline(const PipelineConfig& config);

}  // namespace panosum::pipeline
