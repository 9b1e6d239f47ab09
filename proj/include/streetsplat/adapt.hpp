#pragma once

#include "streetsplat/rasterizer.hpp"
#include "streetsplat/scene.hpp"

#include <cstdint>
#include <random>
#include <vector>

namespace streetsplat {

struct DensifyResult {
  int cloned = 0;
  int split = 0;
  int pruned = 0;
  FamilyRemap remap;
};

/// Clone/split free Gaussians whose mean accumulated 2D gradient exceeds the
/// threshold, then drop free and road Gaussians that are nearly transparent
/// or oversized. Densification statistics are reset.
DensifyResult densify_and_prune(HybridScene& scene, GradientBuffer& grads, std::mt19937_64& rng);

/// Threshold pruning only (no densification).
DensifyResult prune_by_threshold(HybridScene& scene);

/// Reorders the gradient buffer's per-Gaussian statistics after an edit.
void remap_gradients(GradientBuffer& grads, const FamilyRemap& map);

struct ImportanceState {
  std::vector<double> score;  // per free Gaussian
  std::vector<double> tau;    // last volume weight used
  double v_max50 = 0.0;
  int samples = 0;

  void reset(std::size_t n);
  void remap(const FamilyRemap& map);
};

/// Ellipsoid volume 4/3 pi sx sy sz of a free Gaussian.
double gaussian_volume(const FreeGaussian& g);

/// Number of image pixels inside the 3-sigma footprint (d^T conic d <= 9) of
/// a projected primitive.
long footprint_pixels(const SplatPrimitive& p, int width, int height);

/// IS_j += sum over cameras of hits_j * sigmoid(alpha_j) * tau_j * grad_j / L.
void accumulate_importance(ImportanceState& state, const HybridScene& scene,
                           const std::vector<Camera>& cameras, const GradientBuffer& grads,
                           double loss_total);

struct PruneResult {
  int pruned = 0;
  FamilyRemap remap;
};

/// Removes floor(eta% of |free|) free Gaussians with the lowest score (ties:
/// lower opacity first) and resets the state.
PruneResult importance_prune(HybridScene& scene, ImportanceState& state, double eta_percent);

/// Depth with pixels of silhouette below `threshold` set to 0.
Image silhouette_filter(const RenderOutput& output, double threshold);

}  // namespace streetsplat
