#pragma once

#include "streetsplat/config.hpp"
#include "streetsplat/rasterizer.hpp"
#include "streetsplat/scene.hpp"

#include <Eigen/Core>

#include <vector>

namespace streetsplat {

/// Adam with per-parameter-group learning rates. Moments live in arrays
/// parallel to the scene's families; structural edits must be mirrored with
/// remap().
class AdamOptimizer {
 public:
  using FreeVec = Eigen::Matrix<double, FreeGaussian::kLearnables, 1>;
  using ConstrainedVec = Eigen::Matrix<double, SphereGaussian::kLearnables, 1>;

  AdamOptimizer() = default;
  explicit AdamOptimizer(const SceneConfig& cfg) : cfg_(cfg) {}

  /// Applies one update. Returns false (and counts a skipped step) when any
  /// gradient is non-finite; the scene is then left untouched.
  bool step(HybridScene& scene, const GradientBuffer& grads);

  void remap(const FamilyRemap& map);
  /// Grows the state to the scene's sizes with zero moments.
  void resize_like(const HybridScene& scene);

  int step_count() const { return steps_; }
  int skipped_steps() const { return skipped_; }

  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-15;

 private:
  template <int N>
  struct Moments {
    Eigen::Matrix<double, N, 1> m = Eigen::Matrix<double, N, 1>::Zero();
    Eigen::Matrix<double, N, 1> v = Eigen::Matrix<double, N, 1>::Zero();
    int t = 0;
  };

  SceneConfig cfg_;
  std::vector<Moments<FreeGaussian::kLearnables>> free_;
  std::vector<Moments<SphereGaussian::kLearnables>> sky_;
  std::vector<Moments<PlaneGaussian::kLearnables>> inlier_;
  int steps_ = 0;
  int skipped_ = 0;
};

/// Flattened parameter / gradient views, in the order
/// position(3) log_scale(3) color(3) rotation(4) opacity(1) for free Gaussians
/// and xz(2) log_scale(2) color(3) opacity(1) for the constrained families.
AdamOptimizer::FreeVec pack(const FreeGaussian& g);
AdamOptimizer::FreeVec pack(const FreeGrad& g);
void unpack(const AdamOptimizer::FreeVec& v, FreeGaussian& g);
AdamOptimizer::ConstrainedVec pack(const SphereGaussian& g);
AdamOptimizer::ConstrainedVec pack(const PlaneGaussian& g);
AdamOptimizer::ConstrainedVec pack(const ConstrainedGrad& g);
void unpack(const AdamOptimizer::ConstrainedVec& v, SphereGaussian& g);
void unpack(const AdamOptimizer::ConstrainedVec& v, PlaneGaussian& g);

}  // namespace streetsplat
