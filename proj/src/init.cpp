#include "streetsplat/init.hpp"

#include "streetsplat/errors.hpp"
#include "streetsplat/rasterizer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

namespace streetsplat {

double triangulate(const Correspondence& corr, const Pose& pose_a, const Pose& pose_b,
                   const Intrinsics& k) {
  const Vec3 oa = pose_a.center();
  const Vec3 ob = pose_b.center();
  const Vec3 da = (pose_a.rotation * k.ray(corr.pixel_t.x(), corr.pixel_t.y())).normalized();
  const Vec3 db = (pose_b.rotation * k.ray(corr.pixel_t1.x(), corr.pixel_t1.y())).normalized();
  const Vec3 w = oa - ob;
  if (w.norm() < 1e-9) throw DegenerateRays("zero baseline");
  const double b = da.dot(db);
  const double denom = 1.0 - b * b;
  if (std::acos(std::clamp(std::abs(b), 0.0, 1.0)) < 1e-5 || denom < 1e-18)
    throw DegenerateRays("rays nearly parallel");
  const double d = da.dot(w);
  const double e = db.dot(w);
  const double ta = (b * e - d) / denom;
  const double tb = (e - b * d) / denom;
  const Vec3 mid = 0.5 * ((oa + ta * da) + (ob + tb * db));
  const double z = pose_a.to_camera(mid).z();
  if (z <= 0.0 || ta <= 0.0) throw BehindCamera("triangulated point behind camera");
  return z;
}

double ray_angle(const Intrinsics& k, const Vec2& pixel) {
  const Vec3 r = k.ray(pixel.x(), pixel.y());
  return std::atan(r.head<2>().norm());
}

double approximate_depth(double theta, double flow, double C, double theta_min) {
  return C * std::tan(std::max(theta, theta_min)) / flow;
}

double calibrate_depth_constant(const std::vector<DepthEstimate>& triangulated, double f_th,
                                double fallback) {
  std::vector<double> c;
  for (const DepthEstimate& e : triangulated) {
    if (e.source != DepthEstimate::Source::Triangulated) continue;
    if (e.flow < f_th || e.flow > 2.0 * f_th) continue;
    const double t = std::tan(e.angle);
    if (t <= 0.0) continue;
    c.push_back(e.depth * e.flow / t);
  }
  if (c.size() < 5) return fallback;
  const std::size_t mid = c.size() / 2;
  std::nth_element(c.begin(), c.begin() + mid, c.end());
  if (c.size() % 2 == 1) return c[mid];
  const double hi = c[mid];
  return 0.5 * (hi + *std::max_element(c.begin(), c.begin() + mid));
}

std::vector<DepthEstimate> estimate_depths(const std::vector<Correspondence>& corrs, const Frame& frame,
                                           const Frame& other, const SceneConfig& cfg,
                                           double* constant_out) {
  const double theta_min = cfg.min_ray_angle_deg * std::numbers::pi / 180.0;
  std::vector<DepthEstimate> tri;
  std::vector<std::pair<const Correspondence*, double>> small;
  // Parallax flow: the match seen through `other` rotated to frame's orientation.
  // Rotation moves every pixel regardless of depth, so it says nothing about range.
  const Mat3 derotate = frame.pose.rotation.transpose() * other.pose.rotation;
  auto parallax = [&](const Correspondence& c) {
    const Vec3 r = derotate * other.intrinsics.ray(c.pixel_t1.x(), c.pixel_t1.y());
    if (r.z() <= 1e-9) return c.flow;
    return (frame.intrinsics.project(r) - c.pixel_t).norm();
  };
  for (const Correspondence& c : corrs) {
    DepthEstimate e;
    e.pixel = c.pixel_t;
    e.flow = parallax(c);
    e.angle = ray_angle(frame.intrinsics, c.pixel_t);
    if (e.flow >= cfg.flow_threshold) {
      try {
        e.depth = triangulate(c, frame.pose, other.pose, frame.intrinsics);
        e.source = DepthEstimate::Source::Triangulated;
        tri.push_back(e);
        continue;
      } catch (const DegenerateRays&) {
      } catch (const BehindCamera&) {
        continue;
      }
    }
    if (e.flow > 0.0) small.push_back({&c, e.flow});
  }
  const double C = calibrate_depth_constant(tri, cfg.flow_threshold, cfg.default_depth_constant);
  if (constant_out) *constant_out = C;
  std::vector<DepthEstimate> out = std::move(tri);
  for (const auto& [c, flow] : small) {
    DepthEstimate e;
    e.pixel = c->pixel_t;
    e.flow = flow;
    e.angle = ray_angle(frame.intrinsics, c->pixel_t);
    e.depth = approximate_depth(e.angle, e.flow, C, theta_min);
    e.source = DepthEstimate::Source::Approximated;
    out.push_back(e);
  }
  return out;
}

double median_depth_error(const RenderOutput& prior, const std::vector<DepthSample>& samples) {
  std::vector<double> err;
  for (const DepthSample& s : samples) {
    if (s.u < 0 || s.v < 0 || s.u >= prior.depth.width() || s.v >= prior.depth.height()) continue;
    if (prior.silhouette.at(s.u, s.v) <= 0.0) continue;
    err.push_back(std::abs(prior.depth.at(s.u, s.v) - s.depth));
  }
  if (err.empty()) return 0.0;
  const std::size_t mid = err.size() / 2;
  std::nth_element(err.begin(), err.begin() + mid, err.end());
  return err[mid];
}

std::vector<SeedPoint> gather_seeds(const Frame& frame, const std::vector<DepthEstimate>& estimates,
                                    const RenderOutput* prior, const SceneConfig& cfg) {
  const int W = frame.width();
  const int H = frame.height();
  const Intrinsics& k = frame.intrinsics;
  const double mde = prior ? median_depth_error(*prior, frame.sparse_depth) : 0.0;
  std::vector<char> taken(static_cast<std::size_t>(W) * H, 0);
  std::vector<SeedPoint> out;

  auto consider = [&](double u, double v, double depth, bool lidar) {
    const int x = static_cast<int>(std::lround(u));
    const int y = static_cast<int>(std::lround(v));
    if (x < 0 || y < 0 || x >= W || y >= H || !(depth > 0.0) || !std::isfinite(depth)) return;
    char& slot = taken[static_cast<std::size_t>(y) * W + x];
    if (slot) return;
    if (frame.sky_mask && frame.sky_mask->at(x, y)) return;
    if (prior) {
      const double S = prior->silhouette.at(x, y);
      const double D = prior->depth.at(x, y);
      const bool uncovered = S < cfg.silhouette_seed;
      const bool wrong = std::abs(D - depth) > cfg.mde_factor * mde;
      if (!uncovered && !wrong) return;
    }
    slot = 1;
    SeedPoint p;
    p.pixel = Vec2(u, v);
    p.depth = depth;
    p.world = frame.pose.to_world(k.unproject(u, v, depth));
    p.color = Vec3(frame.rgb.at(x, y, 0), frame.rgb.at(x, y, 1), frame.rgb.at(x, y, 2));
    p.radius = depth / k.fx * cfg.seed_radius_px;
    p.lidar = lidar;
    out.push_back(p);
  };

  for (const DepthSample& s : frame.sparse_depth) consider(s.u, s.v, s.depth, true);
  for (const DepthEstimate& e : estimates) consider(e.pixel.x(), e.pixel.y(), e.depth, false);
  return out;
}

int add_seeds(HybridScene& scene, const std::vector<SeedPoint>& seeds, const std::vector<bool>& inlier,
              int segment_id) {
  int added = 0;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    const SeedPoint& p = seeds[i];
    const double ls = std::log(p.radius);
    if (!inlier.empty() && inlier[i]) {
      PlaneGaussian g;
      g.xz = Vec2(p.world.x(), p.world.z());
      g.log_scale = Vec2::Constant(ls);
      g.color = p.color;
      g.opacity = 0.0;
      g.segment_id = segment_id;
      scene.inlier.push_back(g);
    } else {
      FreeGaussian g;
      g.position = p.world;
      g.log_scale = Vec3::Constant(ls);
      g.color = p.color;
      g.opacity = 0.0;
      scene.free.push_back(g);
    }
    ++added;
  }
  return added;
}

int seed_from_frame(HybridScene& scene, const Frame& frame, const std::vector<DepthEstimate>& estimates,
                    const RenderOutput* prior) {
  return add_seeds(scene, gather_seeds(frame, estimates, prior, scene.config), {}, 0);
}

namespace {

using Cell = std::pair<long, long>;

Cell sky_cell(const Vec3& dir, double pitch) {
  const double az = std::atan2(dir.x(), dir.z());
  const double el = std::asin(std::clamp(dir.y(), -1.0, 1.0));
  return {static_cast<long>(std::floor(az / pitch)), static_cast<long>(std::floor(el / pitch))};
}

}  // namespace

int spawn_sky(HybridScene& scene, const Frame& frame, const RenderOutput* prior) {
  if (!frame.sky_mask) return 0;
  const SceneConfig& cfg = scene.config;
  const Intrinsics& k = frame.intrinsics;
  const double R = cfg.sky_radius;
  const double pitch = cfg.sky_cell_px / k.fx;
  const double min_el = std::acos(0.998);

  std::set<Cell> occupied;
  for (const SphereGaussian& g : scene.sky) {
    const double y = std::sqrt(std::max(R * R - g.xz.squaredNorm(), 0.0));
    occupied.insert(sky_cell(Vec3(g.xz.x(), y, g.xz.y()) / R, pitch));
  }

  int added = 0;
  for (int v = 0; v < frame.height(); ++v) {
    for (int u = 0; u < frame.width(); ++u) {
      if (!frame.sky_mask->at(u, v)) continue;
      if (prior && prior->silhouette.at(u, v) >= cfg.silhouette_seed) continue;
      // Directions only: the dome travels with the camera.
      const Vec3 dir = (frame.pose.rotation * k.ray(u, v)).normalized();
      if (dir.y() <= 0.02) continue;
      const Cell cell = sky_cell(dir, pitch);
      if (!occupied.insert(cell).second) continue;
      // Cell centers keep the stored (x, z) far from cell boundaries, so the
      // occupancy test above is stable when recomputed from the scene.
      const double az = (cell.first + 0.5) * pitch;
      // The disc clamp lifts anything below min_el; keep it inside this cell or skip.
      const double el = std::max((cell.second + 0.5) * pitch, min_el);
      if (el >= (cell.second + 1) * pitch) continue;
      SphereGaussian g;
      g.xz = Vec2(std::sin(az) * std::cos(el), std::cos(az) * std::cos(el)) * R;
      project_into_disc(g, R);
      g.log_scale = Vec2::Constant(std::log(R * pitch));
      g.color = Vec3(frame.rgb.at(u, v, 0), frame.rgb.at(u, v, 1), frame.rgb.at(u, v, 2));
      g.opacity = 0.0;
      scene.sky.push_back(g);
      ++added;
    }
  }
  return added;
}

}  // namespace streetsplat
