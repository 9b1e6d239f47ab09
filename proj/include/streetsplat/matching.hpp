#pragma once

#include "streetsplat/ingest.hpp"

#include <memory>
#include <vector>

namespace streetsplat {

/// Supplies pixel correspondences between two adjacent frames. An empty
/// result means no usable matches.
class CorrespondenceProvider {
 public:
  virtual ~CorrespondenceProvider() = default;
  virtual std::vector<Correspondence> match(const Frame& frame_t, const Frame& frame_t1) const = 0;
};

/// Exact correspondences for synthetic data: warps a pixel grid of frame t
/// through its ground-truth depth into frame t+1 and keeps pairs that are
/// visible (depth-consistent) in t+1.
class GroundTruthMatcher final : public CorrespondenceProvider {
 public:
  explicit GroundTruthMatcher(int stride = 2) : stride_(stride) {}
  std::vector<Correspondence> match(const Frame& frame_t, const Frame& frame_t1) const override;

 private:
  int stride_;
};

/// Harris corners in frame t matched into frame t+1 by zero-mean normalized
/// cross-correlation over a search window, with sub-pixel peak refinement.
class PatchMatcher final : public CorrespondenceProvider {
 public:
  struct Options {
    int max_corners = 400;
    int min_distance = 4;         // px between kept corners
    double harris_k = 0.04;
    double min_response = 1e-6;   // absolute; textureless images yield nothing
    double relative_response = 0.01;
    int patch_radius = 3;         // 7x7 patches
    int search_radius = 12;
    double min_score = 0.9;
  };

  PatchMatcher() = default;
  explicit PatchMatcher(const Options& opts) : opts_(opts) {}
  std::vector<Correspondence> match(const Frame& frame_t, const Frame& frame_t1) const override;

  /// Corner pixels of a gray image, strongest first.
  std::vector<Vec2> detect_corners(const Image& gray) const;

 private:
  Options opts_;
};

/// Free-function entry point; uses the ground-truth matcher when both frames
/// carry ground-truth depth and the patch matcher otherwise.
std::vector<Correspondence> match_features(const Frame& frame_t, const Frame& frame_t1);

/// Where a pixel of frame a lands in frame b, using frame a's ground-truth
/// depth. Returns false for sky / missing depth or points behind camera b.
bool ground_truth_warp(const Frame& a, const Frame& b, const Vec2& pixel, Vec2& out);

}  // namespace streetsplat
