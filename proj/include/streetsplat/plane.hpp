#pragma once

#include "streetsplat/config.hpp"
#include "streetsplat/scene.hpp"

#include <cstdint>
#include <vector>

namespace streetsplat {

using PointCloud = std::vector<Vec3>;

struct PlaneFit {
  PlaneSegment segment;
  std::vector<bool> inliers;
  double rms = 0.0;  // inlier point-plane distance after refit
};

/// RANSAC over 3-point hypotheses (score: inlier count, then lower RMS),
/// followed by a least-squares refit on the inliers. Throws DegenerateCloud
/// when the points do not span a plane and VerticalPlane when |B| < 0.1.
PlaneFit fit_plane_ransac(const PointCloud& cloud, double distance_threshold, int iterations,
                          std::uint64_t seed);

/// Least-squares plane through the points, canonicalized to B >= 0.
Vec4 fit_plane_least_squares(const PointCloud& cloud);

struct Partition {
  std::vector<int> inliers;
  std::vector<int> outliers;
};

/// Inliers are points strictly closer than `distance_threshold`.
Partition classify(const PointCloud& cloud, const PlaneSegment& segment, double distance_threshold);

/// Road model over anchor frames a0 < a1 < ...: segment i spans [a_i, a_{i+1}]
/// and is fitted from points first seen in that interval. A single anchor
/// yields one open-ended segment. Existing segments keep their index; the last
/// one is refitted as its interval grows. Failed fits copy the previous
/// segment's plane.
std::vector<PlaneSegment> update_segments(const std::vector<PlaneSegment>& segments,
                                          const std::vector<int>& anchors,
                                          const std::vector<PointCloud>& points_by_frame,
                                          const SceneConfig& cfg, std::uint64_t seed);

/// Index of the segment whose range contains `frame`; frames past the last
/// range map to the last segment. -1 when there are no segments.
int segment_for_frame(const std::vector<PlaneSegment>& segments, int frame);

}  // namespace streetsplat
