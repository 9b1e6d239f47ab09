#include "streetsplat/rasterizer.hpp"

#include "streetsplat/errors.hpp"

#include <algorithm>
#include <cmath>

namespace streetsplat {

namespace {

constexpr int kTile = RenderSettings::kTileSize;
// exp(-27.6) ~ 1e-12: splats this far out contribute nothing measurable.
constexpr double kMaxPower = 27.6;

bool depth_less(double a, double b, SortStats& stats) {
  ++stats.comparisons;
  return a < b;
}

}  // namespace

void counted_stable_sort(std::vector<std::pair<double, int>>& items, SortStats& stats) {
  for (std::size_t i = 1; i < items.size(); ++i) {
    const auto item = items[i];
    // Fixed-step upper bound over [0, i): ceil(log2 i) + 1 comparisons.
    std::size_t base = 0, n = i;
    while (n > 1) {
      const std::size_t half = n / 2;
      if (!depth_less(item.first, items[base + half].first, stats)) base += half;
      n -= half;
    }
    const std::size_t pos = base + (depth_less(item.first, items[base].first, stats) ? 0 : 1);
    if (pos < i) {
      std::move_backward(items.begin() + pos, items.begin() + i, items.begin() + i + 1);
      items[pos] = item;
    }
  }
}

RenderSettings settings_for(const HybridScene& scene) {
  RenderSettings s;
  s.sort_inliers = scene.config.sort_inliers;
  return s;
}

namespace {

// Pinhole Jacobian at a camera-frame point. The x/z and y/z ratios are clamped
// to 1.3x the half field of view so splats far outside the frustum (e.g. road
// just under the camera) keep a bounded footprint.
struct EwaJacobian {
  Eigen::Matrix<double, 2, 3> j;
  bool clamped_x = false;
  bool clamped_y = false;
  double ax = 0.0;  // possibly clamped x/z
  double ay = 0.0;
};

EwaJacobian ewa_jacobian(const Intrinsics& k, const Vec3& t) {
  const double lim_x = 1.3 * std::max(std::abs(-0.5 - k.cx), std::abs(k.width - 0.5 - k.cx)) / k.fx;
  const double lim_y = 1.3 * std::max(std::abs(-0.5 - k.cy), std::abs(k.height - 0.5 - k.cy)) / k.fy;
  EwaJacobian e;
  const double rx = t.x() / t.z(), ry = t.y() / t.z();
  e.ax = std::clamp(rx, -lim_x, lim_x);
  e.ay = std::clamp(ry, -lim_y, lim_y);
  e.clamped_x = e.ax != rx;
  e.clamped_y = e.ay != ry;
  e.j << k.fx / t.z(), 0.0, -k.fx * e.ax / t.z(),
         0.0, k.fy / t.z(), -k.fy * e.ay / t.z();
  return e;
}

bool project_one(const Vec3& position, const Quat& quat, const Vec3& scale, const Vec3& color,
                 double opacity_logit, const Camera& cam, const RenderSettings& settings,
                 SplatPrimitive& out) {
  const Mat3 w = cam.pose.rotation.transpose();
  const Vec3 t = w * (position - cam.pose.translation);
  if (t.z() < settings.near_plane) return false;
  const Intrinsics& k = cam.intrinsics;

  out.rotation = rotation_matrix(quat);
  out.quat = quat;
  out.scale = scale;
  const Mat3 m = out.rotation * scale.asDiagonal();
  out.cov3d = m * m.transpose();

  const Eigen::Matrix<double, 2, 3> j = ewa_jacobian(k, t).j;
  const Mat3 cov_cam = w * out.cov3d * w.transpose();
  Mat2 cov2d = j * cov_cam * j.transpose();
  cov2d = 0.5 * (cov2d + cov2d.transpose());
  cov2d += settings.dilation * Mat2::Identity();

  const double det = cov2d.determinant();
  if (!(det > 0.0)) return false;
  out.cov2d = cov2d;
  out.conic = cov2d.inverse();
  out.mean2d = k.project(t);
  out.depth = t.z();
  out.p_cam = t;
  out.color = color;
  out.opacity = sigmoid(opacity_logit);
  const double mid = 0.5 * (cov2d(0, 0) + cov2d(1, 1));
  const double lambda = mid + std::sqrt(std::max(0.1, mid * mid - det));
  out.radius = static_cast<int>(std::ceil(settings.sigma_extent * std::sqrt(lambda)));
  return std::isfinite(out.mean2d.x()) && std::isfinite(out.mean2d.y());
}

}  // namespace

std::vector<SplatPrimitive> project(const HybridScene& scene, const Camera& cam,
                                    const RenderSettings& settings) {
  std::vector<SplatPrimitive> prims;
  prims.reserve(scene.size());
  const auto& cfg = scene.config;
  for (std::size_t i = 0; i < scene.free.size(); ++i) {
    const auto& g = scene.free[i];
    SplatPrimitive p;
    const Vec3 scale = g.log_scale.array().exp();
    if (project_one(g.position, g.rotation, scale, g.color, g.opacity, cam, settings, p)) {
      p.family = Family::Outlier;
      p.source = static_cast<int>(i);
      prims.push_back(p);
    }
  }
  for (std::size_t i = 0; i < scene.inlier.size(); ++i) {
    const auto& g = scene.inlier[i];
    const auto lifted = lift_plane(g, scene.segments.at(g.segment_id), cfg.plane_thickness);
    SplatPrimitive p;
    if (project_one(lifted.position, lifted.rotation, lifted.scale, g.color, g.opacity, cam, settings, p)) {
      p.family = Family::Inlier;
      p.source = static_cast<int>(i);
      prims.push_back(p);
    }
  }
  for (std::size_t i = 0; i < scene.sky.size(); ++i) {
    const auto& g = scene.sky[i];
    const auto lifted = lift_sphere(g, cfg.sky_radius, cfg.sky_thickness);
    // The sky frame rides with the camera center, axes parallel to the world.
    const Vec3 world = lifted.position + cam.pose.translation;
    SplatPrimitive p;
    if (project_one(world, lifted.rotation, lifted.scale, g.color, g.opacity, cam, settings, p)) {
      p.family = Family::Sky;
      p.source = static_cast<int>(i);
      prims.push_back(p);
    }
  }
  return prims;
}

std::vector<int> sort_grouped(const std::vector<SplatPrimitive>& prims,
                              const std::vector<int>& members, bool sort_inliers,
                              SortStats& stats) {
  std::vector<std::pair<double, int>> outliers, inliers, sky;
  for (int idx : members) {
    const auto& p = prims[idx];
    switch (p.family) {
      case Family::Outlier: outliers.emplace_back(p.depth, idx); break;
      case Family::Inlier: inliers.emplace_back(p.depth, idx); break;
      case Family::Sky: sky.emplace_back(p.depth, idx); break;
    }
  }
  counted_stable_sort(outliers, stats);
  if (sort_inliers) counted_stable_sort(inliers, stats);
  counted_stable_sort(sky, stats);
  std::vector<int> order;
  order.reserve(members.size());
  for (const auto* group : {&outliers, &inliers, &sky})
    for (const auto& [d, idx] : *group) order.push_back(idx);
  return order;
}

std::vector<int> sort_unified(const std::vector<SplatPrimitive>& prims,
                              const std::vector<int>& members, SortStats& stats) {
  std::vector<std::pair<double, int>> all;
  all.reserve(members.size());
  for (int idx : members) all.emplace_back(prims[idx].depth, idx);
  counted_stable_sort(all, stats);
  std::vector<int> order;
  order.reserve(all.size());
  for (const auto& [d, idx] : all) order.push_back(idx);
  return order;
}

double splat_weight(const SplatPrimitive& p, const Vec2& pixel, double max_weight, double* falloff) {
  const Vec2 d = pixel - p.mean2d;
  const double power = 0.5 * (p.conic(0, 0) * d.x() * d.x() + 2.0 * p.conic(0, 1) * d.x() * d.y() +
                              p.conic(1, 1) * d.y() * d.y());
  if (power > kMaxPower) {
    if (falloff) *falloff = 0.0;
    return 0.0;
  }
  const double g = std::exp(-power);
  if (falloff) *falloff = g;
  return std::min(max_weight, p.opacity * g);
}

PixelResult composite(const std::vector<SplatPrimitive>& prims, const std::vector<int>& order,
                      const Vec2& pixel, const RenderSettings& settings) {
  PixelResult r;
  double t = 1.0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto& p = prims[order[i]];
    const double f = splat_weight(p, pixel, settings.max_weight, nullptr);
    if (f <= 0.0) continue;
    const double w = f * t;
    r.color += w * p.color;
    r.depth += w * p.depth;
    r.silhouette += w;
    t *= 1.0 - f;
    r.contributors = static_cast<int>(i) + 1;
    if (t < settings.transmittance_cutoff) break;
  }
  r.transmittance = t;
  return r;
}

RenderOutput render(const HybridScene& scene, const Camera& cam, const RenderSettings& settings) {
  RenderOutput out;
  const int w = cam.intrinsics.width, h = cam.intrinsics.height;
  out.camera = cam;
  out.settings = settings;
  out.scene_fingerprint = fingerprint(scene);
  out.color = Image(w, h, 3);
  out.depth = Image(w, h, 1);
  out.silhouette = Image(w, h, 1);
  out.transmittance = Image(w, h, 1, 1.0);
  out.contributors.assign(static_cast<std::size_t>(w) * h, 0);
  out.primitives = project(scene, cam, settings);
  out.tiles_x = (w + kTile - 1) / kTile;
  out.tiles_y = (h + kTile - 1) / kTile;
  const int n_tiles = out.tiles_x * out.tiles_y;

  std::vector<std::vector<int>> members(n_tiles);
  for (std::size_t i = 0; i < out.primitives.size(); ++i) {
    const auto& p = out.primitives[i];
    const int x0 = static_cast<int>(std::floor((p.mean2d.x() - p.radius) / kTile));
    const int x1 = static_cast<int>(std::floor((p.mean2d.x() + p.radius) / kTile));
    const int y0 = static_cast<int>(std::floor((p.mean2d.y() - p.radius) / kTile));
    const int y1 = static_cast<int>(std::floor((p.mean2d.y() + p.radius) / kTile));
    for (int ty = std::max(0, y0); ty <= std::min(out.tiles_y - 1, y1); ++ty)
      for (int tx = std::max(0, x0); tx <= std::min(out.tiles_x - 1, x1); ++tx)
        members[ty * out.tiles_x + tx].push_back(static_cast<int>(i));
  }

  out.tile_lists.resize(n_tiles);
  std::vector<SortStats> tile_stats(n_tiles);
#pragma omp parallel for schedule(dynamic)
  for (int tile = 0; tile < n_tiles; ++tile) {
    out.tile_lists[tile] = settings.unified_sort
                               ? sort_unified(out.primitives, members[tile], tile_stats[tile])
                               : sort_grouped(out.primitives, members[tile], settings.sort_inliers,
                                              tile_stats[tile]);
    const int tx = tile % out.tiles_x, ty = tile / out.tiles_x;
    for (int y = ty * kTile; y < std::min(h, (ty + 1) * kTile); ++y) {
      for (int x = tx * kTile; x < std::min(w, (tx + 1) * kTile); ++x) {
        const auto r = composite(out.primitives, out.tile_lists[tile], Vec2(x, y), settings);
        for (int c = 0; c < 3; ++c) out.color.at(x, y, c) = r.color[c];
        out.depth.at(x, y) = r.depth;
        out.silhouette.at(x, y) = r.silhouette;
        out.transmittance.at(x, y) = r.transmittance;
        out.contributors[static_cast<std::size_t>(y) * w + x] = r.contributors;
      }
    }
  }
  for (const auto& s : tile_stats) out.sort_stats.comparisons += s.comparisons;
  return out;
}

// ---------------------------------------------------------------------------
// Backward

void GradientBuffer::resize_like(const HybridScene& scene) {
  free.assign(scene.free.size(), FreeGrad{});
  sky.assign(scene.sky.size(), ConstrainedGrad{});
  inlier.assign(scene.inlier.size(), ConstrainedGrad{});
  free_grad2d.assign(scene.free.size(), 0.0);
  sky_grad2d.assign(scene.sky.size(), 0.0);
  inlier_grad2d.assign(scene.inlier.size(), 0.0);
  free_grad2d_accum.resize(scene.free.size(), 0.0);
  free_observations.resize(scene.free.size(), 0);
}

void GradientBuffer::zero_gradients() {
  std::fill(free.begin(), free.end(), FreeGrad{});
  std::fill(sky.begin(), sky.end(), ConstrainedGrad{});
  std::fill(inlier.begin(), inlier.end(), ConstrainedGrad{});
  std::fill(free_grad2d.begin(), free_grad2d.end(), 0.0);
  std::fill(sky_grad2d.begin(), sky_grad2d.end(), 0.0);
  std::fill(inlier_grad2d.begin(), inlier_grad2d.end(), 0.0);
}

void GradientBuffer::reset_statistics() {
  std::fill(free_grad2d_accum.begin(), free_grad2d_accum.end(), 0.0);
  std::fill(free_observations.begin(), free_observations.end(), 0);
}

bool GradientBuffer::matches(const HybridScene& scene) const {
  return free.size() == scene.free.size() && sky.size() == scene.sky.size() &&
         inlier.size() == scene.inlier.size() && free_grad2d_accum.size() == scene.free.size() &&
         free_observations.size() == scene.free.size();
}

namespace {

struct SplatGrad {
  Vec2 mean2d = Vec2::Zero();
  Mat2 conic = Mat2::Zero();
  double opacity = 0.0;  // activated
  Vec3 color = Vec3::Zero();
  double depth = 0.0;
  bool touched = false;

  void add(const SplatGrad& o) {
    mean2d += o.mean2d;
    conic += o.conic;
    opacity += o.opacity;
    color += o.color;
    depth += o.depth;
    touched = touched || o.touched;
  }
};

struct ParamGrad {
  Vec3 position = Vec3::Zero();  // world
  Quat quat = Quat::Zero();
  Vec3 scale = Vec3::Zero();     // activated
};

// Chains screen-space gradients back to world position, rotation and scale.
ParamGrad splat_to_params(const SplatPrimitive& p, const SplatGrad& g, const Camera& cam) {
  const Intrinsics& k = cam.intrinsics;
  const Mat3 w = cam.pose.rotation.transpose();
  const Vec3& t = p.p_cam;
  const double iz = 1.0 / t.z(), iz2 = iz * iz, iz3 = iz2 * iz;

  Vec3 dt = Vec3::Zero();
  // mean2d = (fx tx/tz + cx, fy ty/tz + cy)
  dt.x() += g.mean2d.x() * k.fx * iz;
  dt.y() += g.mean2d.y() * k.fy * iz;
  dt.z() += -g.mean2d.x() * k.fx * t.x() * iz2 - g.mean2d.y() * k.fy * t.y() * iz2;
  dt.z() += g.depth;

  // conic = cov2d^-1
  const Mat2 dcov2d = -p.conic * g.conic * p.conic;

  const EwaJacobian e = ewa_jacobian(k, t);
  const Eigen::Matrix<double, 2, 3>& j = e.j;
  const Mat3 cov_cam = w * p.cov3d * w.transpose();
  const Mat3 dcov_cam = j.transpose() * dcov2d * j;
  const Eigen::Matrix<double, 2, 3> dj = (dcov2d + dcov2d.transpose()) * j * cov_cam;
  dt.z() += dj(0, 0) * (-k.fx * iz2) + dj(1, 1) * (-k.fy * iz2);
  // J02 = -fx ax / tz with ax = tx / tz, or a constant when clamped.
  if (e.clamped_x) {
    dt.z() += dj(0, 2) * (k.fx * e.ax * iz2);
  } else {
    dt.x() += dj(0, 2) * (-k.fx * iz2);
    dt.z() += dj(0, 2) * (2.0 * k.fx * t.x() * iz3);
  }
  if (e.clamped_y) {
    dt.z() += dj(1, 2) * (k.fy * e.ay * iz2);
  } else {
    dt.y() += dj(1, 2) * (-k.fy * iz2);
    dt.z() += dj(1, 2) * (2.0 * k.fy * t.y() * iz3);
  }

  const Mat3 dcov3d = w.transpose() * dcov_cam * w;

  ParamGrad out;
  out.position = w.transpose() * dt;
  const Mat3& r = p.rotation;
  const Vec3 s2 = p.scale.cwiseProduct(p.scale);
  for (int a = 0; a < 3; ++a) out.scale[a] = 2.0 * p.scale[a] * r.col(a).dot(dcov3d * r.col(a));
  const Mat3 dr = (dcov3d + dcov3d.transpose()) * r * s2.asDiagonal();
  out.quat = rotation_matrix_vjp(p.quat, dr);
  return out;
}

}  // namespace

void backward(const HybridScene& scene, const RenderOutput& out, const Image& dL_dcolor,
              const Image& dL_ddepth, GradientBuffer& grads) {
  if (fingerprint(scene) != out.scene_fingerprint) {
    throw StaleState("scene changed since the render being differentiated");
  }
  const int w = out.color.width(), h = out.color.height();
  if (!dL_dcolor.same_shape(out.color) || !dL_ddepth.same_shape(out.depth)) {
    throw DimensionMismatch("loss gradient images do not match the render");
  }
  grads.resize_like(scene);

  const int n_tiles = out.tiles_x * out.tiles_y;
  std::vector<std::vector<SplatGrad>> partial(n_tiles);
  const auto& settings = out.settings;

#pragma omp parallel for schedule(dynamic)
  for (int tile = 0; tile < n_tiles; ++tile) {
    const auto& list = out.tile_lists[tile];
    auto& acc = partial[tile];
    acc.assign(list.size(), SplatGrad{});
    const int tx = tile % out.tiles_x, ty = tile / out.tiles_x;
    for (int y = ty * kTile; y < std::min(h, (ty + 1) * kTile); ++y) {
      for (int x = tx * kTile; x < std::min(w, (tx + 1) * kTile); ++x) {
        const Vec2 pix(x, y);
        const Vec3 gc(dL_dcolor.at(x, y, 0), dL_dcolor.at(x, y, 1), dL_dcolor.at(x, y, 2));
        const double gd = dL_ddepth.at(x, y);
        const int n = out.contributors[static_cast<std::size_t>(y) * w + x];
        double t = out.transmittance.at(x, y);
        Vec3 behind_c = Vec3::Zero();
        double behind_d = 0.0;
        for (int i = n - 1; i >= 0; --i) {
          const auto& p = out.primitives[list[i]];
          double falloff = 0.0;
          const double f = splat_weight(p, pix, settings.max_weight, &falloff);
          if (f <= 0.0) continue;
          const double t_before = t / (1.0 - f);
          const double wgt = f * t_before;
          SplatGrad& g = acc[i];
          g.touched = true;
          g.color += wgt * gc;
          g.depth += wgt * gd;
          const double df = t_before * (p.color.dot(gc) + p.depth * gd) -
                            (behind_c.dot(gc) + behind_d * gd) / (1.0 - f);
          behind_c += wgt * p.color;
          behind_d += wgt * p.depth;
          t = t_before;
          if (p.opacity * falloff >= settings.max_weight) continue;  // clamped
          g.opacity += falloff * df;
          const double dg = p.opacity * df;  // dL/d falloff
          const Vec2 d = pix - p.mean2d;
          const Vec2 qd = p.conic * d;
          g.mean2d += dg * falloff * qd;
          g.conic += dg * falloff * (-0.5) * (d * d.transpose());
        }
      }
    }
  }

  // Deterministic reduction in tile order.
  std::vector<SplatGrad> splat(out.primitives.size());
  for (int tile = 0; tile < n_tiles; ++tile) {
    const auto& list = out.tile_lists[tile];
    for (std::size_t i = 0; i < list.size(); ++i) splat[list[i]].add(partial[tile][i]);
  }
  std::vector<bool> binned(out.primitives.size(), false);
  for (const auto& list : out.tile_lists)
    for (int idx : list) binned[idx] = true;

  const auto& cfg = scene.config;
  for (std::size_t i = 0; i < out.primitives.size(); ++i) {
    const auto& p = out.primitives[i];
    const auto& g = splat[i];
    if (!binned[i]) continue;
    const ParamGrad pg = splat_to_params(p, g, out.camera);
    const double dlogit = g.opacity * p.opacity * (1.0 - p.opacity);
    const double g2d = g.mean2d.norm();
    switch (p.family) {
      case Family::Outlier: {
        auto& fg = grads.free[p.source];
        fg.position += pg.position;
        fg.rotation += pg.quat;
        fg.log_scale += pg.scale.cwiseProduct(p.scale);
        fg.color += g.color;
        fg.opacity += dlogit;
        grads.free_grad2d[p.source] += g2d;
        break;
      }
      case Family::Inlier: {
        const auto& src = scene.inlier[p.source];
        const auto jac = lift_plane_jacobian(scene.segments.at(src.segment_id));
        auto& cg = grads.inlier[p.source];
        cg.xz += jac.d_position.transpose() * pg.position;
        cg.log_scale += Vec2(pg.scale[0] * p.scale[0], pg.scale[2] * p.scale[2]);
        cg.color += g.color;
        cg.opacity += dlogit;
        grads.inlier_grad2d[p.source] += g2d;
        break;
      }
      case Family::Sky: {
        const auto& src = scene.sky[p.source];
        const auto jac = lift_sphere_jacobian(src, cfg.sky_radius);
        auto& cg = grads.sky[p.source];
        cg.xz += jac.d_position.transpose() * pg.position + jac.d_rotation.transpose() * pg.quat;
        cg.log_scale += Vec2(pg.scale[0] * p.scale[0], pg.scale[2] * p.scale[2]);
        cg.color += g.color;
        cg.opacity += dlogit;
        grads.sky_grad2d[p.source] += g2d;
        break;
      }
    }
  }
  for (std::size_t i = 0; i < out.primitives.size(); ++i) {
    const auto& p = out.primitives[i];
    if (p.family != Family::Outlier || !binned[i]) continue;
    grads.free_grad2d_accum[p.source] += grads.free_grad2d[p.source];
    grads.free_observations[p.source] += 1;
  }
}

}  // namespace streetsplat
