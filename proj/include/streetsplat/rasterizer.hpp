#pragma once

#include "streetsplat/image.hpp"
#include "streetsplat/ingest.hpp"
#include "streetsplat/scene.hpp"

#include <cstdint>
#include <vector>

namespace streetsplat {

enum class Family : std::uint8_t { Outlier = 0, Inlier = 1, Sky = 2 };

struct Camera {
  Pose pose;
  Intrinsics intrinsics;

  static Camera of(const Frame& f) { return {f.pose, f.intrinsics}; }
};

/// A Gaussian after projection to the image plane.
struct SplatPrimitive {
  Vec2 mean2d = Vec2::Zero();   // px
  Mat2 cov2d = Mat2::Identity();  // px^2, dilated
  Mat2 conic = Mat2::Identity();  // inverse of cov2d
  double depth = 0.0;           // camera-frame z of the center, m
  Vec3 color = Vec3::Zero();
  double opacity = 0.0;         // activated
  Family family = Family::Outlier;
  int source = 0;               // index within its family
  int radius = 0;               // px, ceil(3 sigma_max)

  // Retained for the backward pass.
  Vec3 p_cam = Vec3::Zero();
  Mat3 cov3d = Mat3::Zero();    // world frame
  Mat3 rotation = Mat3::Identity();
  Vec3 scale = Vec3::Zero();
  Quat quat = identity_quat();
};

struct RenderSettings {
  static constexpr int kTileSize = 16;
  double near_plane = 0.1;
  double dilation = 0.3;             // px^2 added to cov2d
  double transmittance_cutoff = 1e-4;
  double max_weight = 0.99;          // per-splat weight clamp
  double sigma_extent = 3.0;         // binning footprint in std-devs
  bool unified_sort = false;         // oracle: one global depth sort per tile
  bool sort_inliers = false;
};

struct SortStats {
  std::uint64_t comparisons = 0;
};

/// Stable binary-insertion sort of (depth, index) pairs by depth. The binary
/// search takes a fixed number of steps for a given prefix length, so the
/// comparison count depends only on the list length.
void counted_stable_sort(std::vector<std::pair<double, int>>& items, SortStats& stats);

struct RenderOutput {
  Image color;         // H x W x 3
  Image depth;         // H x W
  Image silhouette;    // H x W
  Image transmittance; // final per-pixel transmittance
  std::vector<int> contributors;  // per pixel, number of list entries composited

  std::vector<SplatPrimitive> primitives;
  int tiles_x = 0;
  int tiles_y = 0;
  std::vector<std::vector<int>> tile_lists;  // front-to-back primitive indices
  SortStats sort_stats;

  Camera camera;
  RenderSettings settings;
  std::uint64_t scene_fingerprint = 0;
};

/// Lifts and projects every Gaussian; primitives behind the near plane are
/// dropped. Order: free, inlier, sky, each in scene order.
std::vector<SplatPrimitive> project(const HybridScene& scene, const Camera& camera,
                                    const RenderSettings& settings = {});

/// Front-to-back order for one tile: depth-sorted outliers, inliers in
/// insertion order, depth-sorted sky.
std::vector<int> sort_grouped(const std::vector<SplatPrimitive>& primitives,
                              const std::vector<int>& tile_members, bool sort_inliers,
                              SortStats& stats);
/// Oracle: one stable depth sort over all families.
std::vector<int> sort_unified(const std::vector<SplatPrimitive>& primitives,
                              const std::vector<int>& tile_members, SortStats& stats);

struct PixelResult {
  Vec3 color = Vec3::Zero();
  double depth = 0.0;
  double silhouette = 0.0;
  double transmittance = 1.0;
  int contributors = 0;
};

/// Per-pixel front-to-back compositing over an ordered list.
PixelResult composite(const std::vector<SplatPrimitive>& primitives, const std::vector<int>& order,
                      const Vec2& pixel, const RenderSettings& settings = {});

/// Per-splat weight f = min(max_weight, opacity * exp(-0.5 d^T conic d)); also
/// returns the unclamped Gaussian falloff.
double splat_weight(const SplatPrimitive& p, const Vec2& pixel, double max_weight, double* falloff);

RenderOutput render(const HybridScene& scene, const Camera& camera, const RenderSettings& settings = {});
inline RenderOutput render(const HybridScene& scene, const Frame& frame,
                           const RenderSettings& settings = {}) {
  return render(scene, Camera::of(frame), settings);
}

/// Settings derived from a scene's config.
RenderSettings settings_for(const HybridScene& scene);

struct FreeGrad {
  Vec3 position = Vec3::Zero();
  Vec3 log_scale = Vec3::Zero();
  Vec3 color = Vec3::Zero();
  Quat rotation = Quat::Zero();
  double opacity = 0.0;
};

struct ConstrainedGrad {
  Vec2 xz = Vec2::Zero();
  Vec2 log_scale = Vec2::Zero();
  Vec3 color = Vec3::Zero();
  double opacity = 0.0;
};

/// Per-parameter gradients plus densification statistics, one entry per
/// Gaussian of each family.
struct GradientBuffer {
  std::vector<FreeGrad> free;
  std::vector<ConstrainedGrad> sky;
  std::vector<ConstrainedGrad> inlier;

  // |dL/dmean2d| of the last backward pass, per family.
  std::vector<double> free_grad2d;
  std::vector<double> sky_grad2d;
  std::vector<double> inlier_grad2d;

  // Densification statistics: accumulated |dL/dmean2d| and the number of
  // passes in which the Gaussian was visible.
  std::vector<double> free_grad2d_accum;
  std::vector<int> free_observations;

  /// Sizes every array to the scene, zeroing parameter gradients and keeping
  /// existing statistics (new entries start at zero).
  void resize_like(const HybridScene& scene);
  void zero_gradients();
  void reset_statistics();
  bool matches(const HybridScene& scene) const;
};

/// Analytic gradients of a loss given dL/dC (H x W x 3) and dL/dD (H x W).
/// Throws StaleState if the scene changed since `output` was rendered.
void backward(const HybridScene& scene, const RenderOutput& output, const Image& dL_dcolor,
              const Image& dL_ddepth, GradientBuffer& grads);

}  // namespace streetsplat
