#pragma once

#include "streetsplat/ingest.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace streetsplat {

struct SynthOptions {
  std::uint64_t seed = 7;
  int n_frames = 10;
  int width = 128;
  int height = 128;
  double speed = 0.5;          // m per frame along the street
  double max_yaw_deg = 0.3;    // amplitude of the slow yaw sway
  double camera_height = 1.5;  // m above the road
  double ramp_deg = 0.0;       // road pitches up by this angle past ramp_start
  double ramp_start = 12.0;    // m, world z
  bool with_objects = true;
  int supersample = 3;         // per-axis color samples per pixel
  int lidar_row_step = 2;
  int lidar_col_step = 2;
};

/// Procedural street: a road surface, boxes and ellipsoids along both sides,
/// a far facade closing the view, and a sky gradient above.
class SynthWorld {
 public:
  struct Box {
    Vec3 lo, hi;
    Vec3 albedo;
  };
  struct Ellipsoid {
    Vec3 center, radii;
    Vec3 albedo;
  };
  enum class Surface { Sky, Road, Object };
  struct Hit {
    Surface surface = Surface::Sky;
    double t = 0.0;  // ray parameter for a unit direction
    Vec3 point = Vec3::Zero();
    Vec3 normal = Vec3::Zero();
    Vec3 albedo = Vec3::Zero();
  };

  SynthWorld(std::uint64_t seed, const SynthOptions& opts);

  /// Nearest intersection of the ray origin + t * dir (|dir| = 1, t > 0).
  Hit intersect(const Vec3& origin, const Vec3& dir) const;
  Vec3 shade(const Hit& hit, const Vec3& dir) const;
  /// Height of the road surface at (x, z).
  double road_height(double z) const;
  Vec3 road_normal(double z) const;

  const std::vector<Box>& boxes() const { return boxes_; }
  const std::vector<Ellipsoid>& ellipsoids() const { return ellipsoids_; }
  std::size_t object_count() const { return boxes_.size() + ellipsoids_.size(); }

 private:
  double noise(double x, double z, double cell) const;

  std::uint64_t seed_;
  double ramp_slope_;
  double ramp_start_;
  std::vector<Box> boxes_;
  std::vector<Ellipsoid> ellipsoids_;
};

struct SynthDataset {
  Intrinsics intrinsics;
  std::vector<Frame> frames;   // rgb quantized to 8 bits, gt_depth filled
  int lidar_cutoff_row = 0;    // sparse depth only at rows >= this
};

Pose synth_camera_pose(const SynthOptions& opts, int index);
Intrinsics synth_intrinsics(const SynthOptions& opts);

/// Renders the sequence in memory; deterministic in opts.seed.
SynthDataset synth_scene(const SynthOptions& opts);
SynthDataset synth_scene(const SynthOptions& opts, const SynthWorld& world);

/// Writes the dataset in the on-disk layout understood by read_frame().
void write_dataset(const std::string& dir, const SynthDataset& data);

}  // namespace streetsplat
