#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

namespace streetsplat {

/// Every tunable of the mapper. Serialized as `key = value` lines; see
/// write_config() for the canonical list of keys.
struct SceneConfig {
  // Constrained families.
  double sky_radius = 1000.0;        // m
  double sky_thickness = 1.0;        // m, radial
  double plane_thickness = 0.01;     // m, along the road normal
  double plane_distance_threshold = 0.15;  // m, inlier gate for road points
  int ransac_iterations = 200;

  // Densify / prune.
  double alpha_threshold = 0.005;    // activated opacity
  double scale_threshold = 1.0;      // m
  double grad_threshold = 2e-4;      // mean 2D positional gradient, px units
  double scene_extent = 10.0;        // m; scales position lr and split size
  double split_fraction = 0.05;      // split_size = split_fraction * scene_extent
  int densify_interval = 20;

  // Losses.
  double lambda_dssim = 0.2;
  double lambda_rgb = 1.0;
  double lambda_lidar = 0.5;
  double lambda_smooth = 0.1;
  double lambda_iso = 10.0;
  double lambda_reg = 1.0;

  // Learning rates (Adam).
  double lr_position = 1.6e-4;       // multiplied by scene_extent
  double lr_color = 2.5e-3;
  double lr_opacity = 5e-2;
  double lr_scale = 5e-3;
  double lr_rotation = 1e-3;

  // Keyframes and schedule.
  int keyframe_count = 10;           // K
  int keyframe_interval = 5;         // n
  int iterations_per_frame = 100;
  int importance_interval = 5;       // record importance every N iterations
  int importance_prune_frames = 2;   // prune every N frames
  double prune_rate = 3.0;           // eta, percent

  // Silhouette gates.
  double silhouette_seed = 0.5;      // S_th
  double silhouette_filter = 0.9;    // S_filter
  double mde_factor = 50.0;

  // Initialization.
  double flow_threshold = 2.0;       // f_th, px
  double min_ray_angle_deg = 1.0;    // theta_min
  double default_depth_constant = 50.0;  // C0 = d_th * f_th / tan(theta_th)
  double seed_radius_px = 2.0;
  double sky_cell_px = 2.0;          // angular dedup grid, in pixels at fx

  // Rasterizer.
  bool sort_inliers = false;

  std::uint64_t seed = 0;
};

/// Throws FormatError on unknown keys, malformed values, or violated ranges.
SceneConfig read_config(std::istream& in);
SceneConfig read_config_file(const std::string& path);
void write_config(std::ostream& out, const SceneConfig& cfg);
/// Throws DomainError when a field is out of range.
void validate(const SceneConfig& cfg);

}  // namespace streetsplat
