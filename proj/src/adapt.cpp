#include "streetsplat/adapt.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <numeric>

namespace streetsplat {

namespace {

bool below_thresholds(double opacity_logit, double max_scale, const SceneConfig& cfg) {
  return sigmoid(opacity_logit) < cfg.alpha_threshold || max_scale > cfg.scale_threshold;
}

template <typename G>
std::vector<int> keep_if(std::vector<G>& items, const std::vector<int>& origin,
                         const std::function<bool(const G&)>& keep, int& removed) {
  std::vector<G> kept;
  std::vector<int> map;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (keep(items[i])) {
      kept.push_back(items[i]);
      map.push_back(origin[i]);
    } else {
      ++removed;
    }
  }
  items = std::move(kept);
  return map;
}

}  // namespace

void remap_gradients(GradientBuffer& grads, const FamilyRemap& map) {
  grads.free = apply_remap(grads.free, map.free, FreeGrad{});
  grads.sky = apply_remap(grads.sky, map.sky, ConstrainedGrad{});
  grads.inlier = apply_remap(grads.inlier, map.inlier, ConstrainedGrad{});
  grads.free_grad2d = apply_remap(grads.free_grad2d, map.free, 0.0);
  grads.sky_grad2d = apply_remap(grads.sky_grad2d, map.sky, 0.0);
  grads.inlier_grad2d = apply_remap(grads.inlier_grad2d, map.inlier, 0.0);
  grads.free_grad2d_accum = apply_remap(grads.free_grad2d_accum, map.free, 0.0);
  grads.free_observations = apply_remap(grads.free_observations, map.free, 0);
}

DensifyResult prune_by_threshold(HybridScene& scene) {
  DensifyResult r;
  r.remap = FamilyRemap::identity(scene);
  const SceneConfig& cfg = scene.config;
  r.remap.free = keep_if<FreeGaussian>(
      scene.free, r.remap.free,
      [&](const FreeGaussian& g) { return !below_thresholds(g.opacity, std::exp(g.log_scale.maxCoeff()), cfg); },
      r.pruned);
  r.remap.inlier = keep_if<PlaneGaussian>(
      scene.inlier, r.remap.inlier,
      [&](const PlaneGaussian& g) { return !below_thresholds(g.opacity, std::exp(g.log_scale.maxCoeff()), cfg); },
      r.pruned);
  return r;
}

DensifyResult densify_and_prune(HybridScene& scene, GradientBuffer& grads, std::mt19937_64& rng) {
  const SceneConfig& cfg = scene.config;
  const double split_size = cfg.split_fraction * cfg.scene_extent;
  const std::size_t n = scene.free.size();
  DensifyResult r;

  std::vector<FreeGaussian> next;
  std::vector<int> origin;
  next.reserve(n);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    const FreeGaussian& g = scene.free[i];
    const int obs = i < grads.free_observations.size() ? grads.free_observations[i] : 0;
    const double mean_grad = obs > 0 ? grads.free_grad2d_accum[i] / obs : 0.0;
    if (!(mean_grad > cfg.grad_threshold)) {
      next.push_back(g);
      origin.push_back(static_cast<int>(i));
      continue;
    }
    const Vec3 scale = g.log_scale.array().exp();
    if (scale.maxCoeff() < split_size) {
      next.push_back(g);
      origin.push_back(static_cast<int>(i));
      next.push_back(g);
      origin.push_back(-1);
      ++r.cloned;
    } else {
      const Mat3 R = rotation_matrix(g.rotation);
      for (int s = 0; s < 2; ++s) {
        FreeGaussian c = g;
        const Vec3 z(normal(rng), normal(rng), normal(rng));
        c.position = g.position + R * scale.cwiseProduct(z);
        c.log_scale = g.log_scale.array() - std::log(1.6);
        next.push_back(c);
        origin.push_back(-1);
      }
      ++r.split;
    }
  }
  scene.free = std::move(next);

  DensifyResult pr = prune_by_threshold(scene);
  r.pruned = pr.pruned;
  r.remap.free.resize(pr.remap.free.size());
  for (std::size_t i = 0; i < pr.remap.free.size(); ++i) r.remap.free[i] = origin[pr.remap.free[i]];
  r.remap.sky = pr.remap.sky;
  r.remap.inlier = pr.remap.inlier;

  remap_gradients(grads, r.remap);
  grads.reset_statistics();
  return r;
}

void ImportanceState::reset(std::size_t n) {
  score.assign(n, 0.0);
  tau.assign(n, 0.0);
  v_max50 = 0.0;
  samples = 0;
}

void ImportanceState::remap(const FamilyRemap& map) {
  score = apply_remap(score, map.free, 0.0);
  tau = apply_remap(tau, map.free, 0.0);
}

double gaussian_volume(const FreeGaussian& g) {
  return 4.0 / 3.0 * std::numbers::pi * std::exp(g.log_scale.sum());
}

long footprint_pixels(const SplatPrimitive& p, int width, int height) {
  const double a = p.conic(0, 0), b = p.conic(0, 1), c = p.conic(1, 1);
  const double det = a * c - b * b;
  if (!(a > 0.0) || !(det > 0.0)) return 0;
  // Row extent of the ellipse d^T conic d = 9: |dy| <= 3 sqrt(cov_yy).
  const double ext_y = 3.0 * std::sqrt(a / det);
  const int y0 = std::max(0, static_cast<int>(std::ceil(p.mean2d.y() - ext_y)));
  const int y1 = std::min(height - 1, static_cast<int>(std::floor(p.mean2d.y() + ext_y)));
  long hits = 0;
  for (int y = y0; y <= y1; ++y) {
    const double dy = y - p.mean2d.y();
    // a dx^2 + 2 b dy dx + c dy^2 - 9 <= 0
    const double disc = b * b * dy * dy - a * (c * dy * dy - 9.0);
    if (disc < 0.0) continue;
    const double r = std::sqrt(disc);
    const double lo = p.mean2d.x() + (-b * dy - r) / a;
    const double hi = p.mean2d.x() + (-b * dy + r) / a;
    const int x0 = std::max(0, static_cast<int>(std::ceil(lo)));
    const int x1 = std::min(width - 1, static_cast<int>(std::floor(hi)));
    if (x1 >= x0) hits += x1 - x0 + 1;
  }
  return hits;
}

void accumulate_importance(ImportanceState& state, const HybridScene& scene,
                           const std::vector<Camera>& cameras, const GradientBuffer& grads,
                           double loss_total) {
  const std::size_t n = scene.free.size();
  if (state.score.size() != n) {
    state.score.resize(n, 0.0);
    state.tau.resize(n, 0.0);
  }
  if (n == 0 || !(loss_total > 0.0)) {
    ++state.samples;
    return;
  }
  std::vector<double> vol(n);
  for (std::size_t j = 0; j < n; ++j) vol[j] = gaussian_volume(scene.free[j]);
  // Median volume: the value at the 50th percentile of the sorted volumes.
  std::vector<double> sorted = vol;
  const std::size_t mid = (n - 1) / 2;
  std::nth_element(sorted.begin(), sorted.begin() + mid, sorted.end());
  state.v_max50 = sorted[mid];

  std::vector<long> hits(n, 0);
  HybridScene free_only;
  free_only.free = scene.free;
  free_only.config = scene.config;
  for (const Camera& cam : cameras) {
    for (const SplatPrimitive& p : project(free_only, cam))
      hits[p.source] += footprint_pixels(p, cam.intrinsics.width, cam.intrinsics.height);
  }
  for (std::size_t j = 0; j < n; ++j) {
    const double tau = std::clamp(vol[j], 0.0, state.v_max50);
    const double grad = j < grads.free_grad2d_accum.size() ? grads.free_grad2d_accum[j] : 0.0;
    state.tau[j] = tau;
    state.score[j] += static_cast<double>(hits[j]) * sigmoid(scene.free[j].opacity) * tau * grad / loss_total;
  }
  ++state.samples;
}

PruneResult importance_prune(HybridScene& scene, ImportanceState& state, double eta_percent) {
  PruneResult r;
  r.remap = FamilyRemap::identity(scene);
  const std::size_t n = scene.free.size();
  const auto count = static_cast<std::size_t>(std::floor(eta_percent / 100.0 * static_cast<double>(n) + 1e-9));
  if (count > 0) {
    state.score.resize(n, 0.0);
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      if (state.score[a] != state.score[b]) return state.score[a] < state.score[b];
      return scene.free[a].opacity < scene.free[b].opacity;
    });
    std::vector<char> drop(n, 0);
    for (std::size_t i = 0; i < count; ++i) drop[order[i]] = 1;
    std::vector<FreeGaussian> kept;
    std::vector<int> map;
    for (std::size_t i = 0; i < n; ++i) {
      if (drop[i]) continue;
      kept.push_back(scene.free[i]);
      map.push_back(static_cast<int>(i));
    }
    scene.free = std::move(kept);
    r.remap.free = std::move(map);
    r.pruned = static_cast<int>(count);
  }
  state.reset(scene.free.size());
  return r;
}

Image silhouette_filter(const RenderOutput& output, double threshold) {
  Image d = output.depth;
  for (int y = 0; y < d.height(); ++y)
    for (int x = 0; x < d.width(); ++x)
      if (output.silhouette.at(x, y) < threshold) d.at(x, y) = 0.0;
  return d;
}

}  // namespace streetsplat
