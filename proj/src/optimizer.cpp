#include "streetsplat/optimizer.hpp"

#include <cmath>

namespace streetsplat {

AdamOptimizer::FreeVec pack(const FreeGaussian& g) {
  AdamOptimizer::FreeVec v;
  v << g.position, g.log_scale, g.color, g.rotation, g.opacity;
  return v;
}
AdamOptimizer::FreeVec pack(const FreeGrad& g) {
  AdamOptimizer::FreeVec v;
  v << g.position, g.log_scale, g.color, g.rotation, g.opacity;
  return v;
}
void unpack(const AdamOptimizer::FreeVec& v, FreeGaussian& g) {
  g.position = v.segment<3>(0);
  g.log_scale = v.segment<3>(3);
  g.color = v.segment<3>(6);
  g.rotation = v.segment<4>(9);
  g.opacity = v[13];
}
AdamOptimizer::ConstrainedVec pack(const SphereGaussian& g) {
  AdamOptimizer::ConstrainedVec v;
  v << g.xz, g.log_scale, g.color, g.opacity;
  return v;
}
AdamOptimizer::ConstrainedVec pack(const PlaneGaussian& g) {
  AdamOptimizer::ConstrainedVec v;
  v << g.xz, g.log_scale, g.color, g.opacity;
  return v;
}
AdamOptimizer::ConstrainedVec pack(const ConstrainedGrad& g) {
  AdamOptimizer::ConstrainedVec v;
  v << g.xz, g.log_scale, g.color, g.opacity;
  return v;
}
void unpack(const AdamOptimizer::ConstrainedVec& v, SphereGaussian& g) {
  g.xz = v.segment<2>(0);
  g.log_scale = v.segment<2>(2);
  g.color = v.segment<3>(4);
  g.opacity = v[7];
}
void unpack(const AdamOptimizer::ConstrainedVec& v, PlaneGaussian& g) {
  g.xz = v.segment<2>(0);
  g.log_scale = v.segment<2>(2);
  g.color = v.segment<3>(4);
  g.opacity = v[7];
}

void AdamOptimizer::resize_like(const HybridScene& scene) {
  free_.resize(scene.free.size());
  sky_.resize(scene.sky.size());
  inlier_.resize(scene.inlier.size());
}

void AdamOptimizer::remap(const FamilyRemap& map) {
  free_ = apply_remap(free_, map.free, Moments<FreeGaussian::kLearnables>{});
  sky_ = apply_remap(sky_, map.sky, Moments<SphereGaussian::kLearnables>{});
  inlier_ = apply_remap(inlier_, map.inlier, Moments<PlaneGaussian::kLearnables>{});
}

namespace {

template <int N>
bool all_finite(const std::vector<Eigen::Matrix<double, N, 1>>& v) {
  for (const auto& x : v)
    if (!x.allFinite()) return false;
  return true;
}

}  // namespace

bool AdamOptimizer::step(HybridScene& scene, const GradientBuffer& grads) {
  resize_like(scene);

  std::vector<FreeVec> gf(scene.free.size());
  std::vector<ConstrainedVec> gs(scene.sky.size()), gi(scene.inlier.size());
  for (std::size_t i = 0; i < gf.size(); ++i) gf[i] = i < grads.free.size() ? pack(grads.free[i]) : FreeVec::Zero();
  for (std::size_t i = 0; i < gs.size(); ++i) gs[i] = i < grads.sky.size() ? pack(grads.sky[i]) : ConstrainedVec::Zero();
  for (std::size_t i = 0; i < gi.size(); ++i) gi[i] = i < grads.inlier.size() ? pack(grads.inlier[i]) : ConstrainedVec::Zero();
  if (!all_finite(gf) || !all_finite(gs) || !all_finite(gi)) {
    ++skipped_;
    return false;
  }
  ++steps_;

  const double lr_pos = cfg_.lr_position * cfg_.scene_extent;
  FreeVec lr_free;
  lr_free << Eigen::Vector3d::Constant(lr_pos), Eigen::Vector3d::Constant(cfg_.lr_scale),
      Eigen::Vector3d::Constant(cfg_.lr_color), Eigen::Vector4d::Constant(cfg_.lr_rotation), cfg_.lr_opacity;
  ConstrainedVec lr_plane;
  lr_plane << Eigen::Vector2d::Constant(lr_pos), Eigen::Vector2d::Constant(cfg_.lr_scale),
      Eigen::Vector3d::Constant(cfg_.lr_color), cfg_.lr_opacity;
  // Sky positions live on a sphere of radius R; step them in proportion.
  ConstrainedVec lr_sky = lr_plane;
  lr_sky.head<2>().setConstant(cfg_.lr_position * cfg_.sky_radius);

  auto update = [&](auto& mom, const auto& g, const auto& lr) {
    using V = std::decay_t<decltype(g)>;
    if (g.isZero(0.0) && mom.t == 0) return V(V::Zero());
    ++mom.t;
    mom.m = beta1 * mom.m + (1.0 - beta1) * g;
    mom.v = beta2 * mom.v + (1.0 - beta2) * g.cwiseProduct(g);
    const double c1 = 1.0 - std::pow(beta1, mom.t);
    const double c2 = 1.0 - std::pow(beta2, mom.t);
    const V mhat = mom.m / c1;
    const V vhat = mom.v / c2;
    return V(-lr.cwiseProduct(mhat.cwiseQuotient((vhat.array().sqrt() + epsilon).matrix())));
  };

  for (std::size_t i = 0; i < scene.free.size(); ++i) {
    const FreeVec delta = update(free_[i], gf[i], lr_free);
    if (delta.isZero(0.0)) continue;
    FreeVec p = pack(scene.free[i]) + delta;
    unpack(p, scene.free[i]);
    auto& g = scene.free[i];
    g.rotation.normalize();
    g.color = g.color.cwiseMax(0.0).cwiseMin(1.0);
  }
  for (std::size_t i = 0; i < scene.sky.size(); ++i) {
    const ConstrainedVec delta = update(sky_[i], gs[i], lr_sky);
    if (delta.isZero(0.0)) continue;
    auto& g = scene.sky[i];
    unpack(ConstrainedVec(pack(g) + delta), g);
    g.color = g.color.cwiseMax(0.0).cwiseMin(1.0);
    project_into_disc(g, scene.config.sky_radius);
  }
  for (std::size_t i = 0; i < scene.inlier.size(); ++i) {
    const ConstrainedVec delta = update(inlier_[i], gi[i], lr_plane);
    if (delta.isZero(0.0)) continue;
    auto& g = scene.inlier[i];
    unpack(ConstrainedVec(pack(g) + delta), g);
    g.color = g.color.cwiseMax(0.0).cwiseMin(1.0);
  }
  return true;
}

}  // namespace streetsplat
