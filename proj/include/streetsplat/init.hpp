#pragma once

#include "streetsplat/config.hpp"
#include "streetsplat/ingest.hpp"
#include "streetsplat/scene.hpp"

#include <optional>
#include <vector>

namespace streetsplat {

struct RenderOutput;

struct DepthEstimate {
  enum class Source { Triangulated, Approximated };

  Vec2 pixel = Vec2::Zero();
  double depth = 0.0;  // m, camera-frame z
  Source source = Source::Triangulated;
  double angle = 0.0;  // rad, ray vs optical axis
  double flow = 0.0;   // px, with the inter-frame rotation removed
};

/// Midpoint triangulation of a correspondence. `pose_a` observes pixel_t and
/// the result is the z of the midpoint in camera a. Throws DegenerateRays or
/// BehindCamera.
double triangulate(const Correspondence& corr, const Pose& pose_a, const Pose& pose_b,
                   const Intrinsics& k);

/// Angle between the ray through `pixel` and the optical axis.
double ray_angle(const Intrinsics& k, const Vec2& pixel);

/// d = C tan(max(theta, theta_min)) / flow.
double approximate_depth(double theta, double flow, double C, double theta_min);

/// Median of d f / tan(theta) over triangulated estimates whose flow lies in
/// [f_th, 2 f_th]; `fallback` when fewer than 5 qualify.
double calibrate_depth_constant(const std::vector<DepthEstimate>& triangulated, double f_th,
                                double fallback);

/// Depths for correspondences whose pixel_t lies in `frame`, triangulated
/// against `other` for large flow and approximated below the flow threshold.
/// Flow here is parallax only: the rotation between the two poses is removed.
std::vector<DepthEstimate> estimate_depths(const std::vector<Correspondence>& corrs, const Frame& frame,
                                           const Frame& other, const SceneConfig& cfg,
                                           double* constant_out = nullptr);

/// A candidate Gaussian center before family assignment.
struct SeedPoint {
  Vec2 pixel = Vec2::Zero();
  double depth = 0.0;
  Vec3 world = Vec3::Zero();
  Vec3 color = Vec3::Zero();
  double radius = 0.0;  // m
  bool lidar = false;
};

/// Median |D - d| over sparse samples with rendered coverage; 0 if none.
double median_depth_error(const RenderOutput& prior, const std::vector<DepthSample>& samples);

/// LiDAR samples plus estimates, back-projected to world. Sky pixels are
/// dropped and, when `prior` is given, only pixels with S < S_th or
/// |D - d| > mde_factor * MDE survive. LiDAR wins when both hit a pixel.
std::vector<SeedPoint> gather_seeds(const Frame& frame, const std::vector<DepthEstimate>& estimates,
                                    const RenderOutput* prior, const SceneConfig& cfg);

/// Appends seeds: points flagged in `inlier` (same length, or empty) become
/// PlaneGaussians on `segment_id`, the rest FreeGaussians.
int add_seeds(HybridScene& scene, const std::vector<SeedPoint>& seeds, const std::vector<bool>& inlier,
              int segment_id);

/// gather_seeds + add_seeds with every point treated as free.
int seed_from_frame(HybridScene& scene, const Frame& frame, const std::vector<DepthEstimate>& estimates,
                    const RenderOutput* prior);

/// Adds sky Gaussians on the dome for uncovered sky pixels, one per cell of an
/// (azimuth, elevation) grid of pitch sky_cell_px / fx radians. Cells already
/// holding a sky Gaussian are skipped.
int spawn_sky(HybridScene& scene, const Frame& frame, const RenderOutput* prior);

}  // namespace streetsplat
