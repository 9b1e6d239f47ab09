#include "streetsplat/synth.hpp"

#include "streetsplat/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

namespace streetsplat {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kRoadHalfWidth = 3.5;

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double lattice(std::uint64_t seed, std::int64_t i, std::int64_t j) {
  const std::uint64_t h = mix(seed ^ mix(static_cast<std::uint64_t>(i) * 73856093ULL ^
                                         static_cast<std::uint64_t>(j) * 19349663ULL));
  return static_cast<double>(h >> 11) * (1.0 / 9007199254740992.0);
}

double smooth(double t) { return t * t * (3.0 - 2.0 * t); }

// Slab test; returns entry t and the face normal.
bool hit_box(const Vec3& o, const Vec3& d, const Vec3& lo, const Vec3& hi, double& t_out,
             Vec3& n_out) {
  double t0 = -kInf, t1 = kInf;
  int axis0 = -1;
  double sign0 = 0.0;
  for (int a = 0; a < 3; ++a) {
    if (std::abs(d[a]) < 1e-15) {
      if (o[a] < lo[a] || o[a] > hi[a]) return false;
      continue;
    }
    double ta = (lo[a] - o[a]) / d[a];
    double tb = (hi[a] - o[a]) / d[a];
    double s = -1.0;
    if (ta > tb) {
      std::swap(ta, tb);
      s = 1.0;
    }
    if (ta > t0) {
      t0 = ta;
      axis0 = a;
      sign0 = s;
    }
    t1 = std::min(t1, tb);
  }
  if (t0 > t1 || t0 <= 1e-9 || axis0 < 0) return false;
  t_out = t0;
  n_out = Vec3::Zero();
  n_out[axis0] = sign0;
  return true;
}

bool hit_ellipsoid(const Vec3& o, const Vec3& d, const Vec3& c, const Vec3& r, double& t_out,
                   Vec3& n_out) {
  const Vec3 oc = (o - c).cwiseQuotient(r);
  const Vec3 dd = d.cwiseQuotient(r);
  const double a = dd.squaredNorm();
  const double b = 2.0 * oc.dot(dd);
  const double cc = oc.squaredNorm() - 1.0;
  const double disc = b * b - 4.0 * a * cc;
  if (disc < 0.0) return false;
  const double sq = std::sqrt(disc);
  double t = (-b - sq) / (2.0 * a);
  if (t <= 1e-9) return false;
  t_out = t;
  const Vec3 p = o + t * d;
  n_out = (p - c).cwiseQuotient(r.cwiseProduct(r)).normalized();
  return true;
}

}  // namespace

SynthWorld::SynthWorld(std::uint64_t seed, const SynthOptions& opts)
    : seed_(seed),
      ramp_slope_(std::tan(opts.ramp_deg * std::numbers::pi / 180.0)),
      ramp_start_(opts.ramp_start) {
  if (!opts.with_objects) return;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  auto uni = [&](double a, double b) { return a + (b - a) * u01(rng); };
  auto palette = [&]() {
    // Saturated but not extreme albedos.
    Vec3 c(uni(0.15, 0.9), uni(0.15, 0.9), uni(0.15, 0.9));
    return c;
  };

  // Roadside objects on both sides, 6 to 14 of them.
  const int n_side = 6 + static_cast<int>(u01(rng) * 9.0);
  for (int i = 0; i < n_side; ++i) {
    const double side = (i % 2 == 0) ? 1.0 : -1.0;
    const double z = uni(7.0, 34.0);
    const double x_near = side * uni(kRoadHalfWidth + 1.0, kRoadHalfWidth + 4.0);
    if (u01(rng) < 0.3) {
      const Vec3 radii(uni(0.7, 1.6), uni(0.8, 2.0), uni(0.7, 1.6));
      const Vec3 center(x_near + side * radii.x(), radii.y() + road_height(z), z);
      ellipsoids_.push_back({center, radii, palette()});
    } else {
      const double w = uni(1.5, 4.0), depth = uni(1.5, 5.0), h = uni(1.5, 7.0);
      const double x0 = side > 0 ? x_near : x_near - w;
      const double base = road_height(z) - 0.2;
      boxes_.push_back({Vec3(x0, base, z), Vec3(x0 + w, base + h, z + depth), palette()});
    }
  }
  // Far facade closing the street.
  const double z_far = 40.0;
  const double far_h = uni(6.0, 9.0);
  boxes_.push_back({Vec3(-45.0, road_height(z_far) - 0.5, z_far),
                    Vec3(45.0, road_height(z_far) + far_h, z_far + 2.0), palette()});
}

double SynthWorld::road_height(double z) const {
  return z <= ramp_start_ ? 0.0 : (z - ramp_start_) * ramp_slope_;
}

Vec3 SynthWorld::road_normal(double z) const {
  return z <= ramp_start_ ? Vec3(0, 1, 0) : Vec3(0, 1, -ramp_slope_).normalized();
}

double SynthWorld::noise(double x, double z, double cell) const {
  const double fx = x / cell, fz = z / cell;
  const auto i = static_cast<std::int64_t>(std::floor(fx));
  const auto j = static_cast<std::int64_t>(std::floor(fz));
  const double tx = smooth(fx - i), tz = smooth(fz - j);
  const double a = lattice(seed_, i, j), b = lattice(seed_, i + 1, j);
  const double c = lattice(seed_, i, j + 1), d = lattice(seed_, i + 1, j + 1);
  return (a * (1 - tx) + b * tx) * (1 - tz) + (c * (1 - tx) + d * tx) * tz;
}

SynthWorld::Hit SynthWorld::intersect(const Vec3& o, const Vec3& d) const {
  Hit best;
  best.t = kInf;

  // Flat section y = 0 for z <= ramp_start, then the inclined section.
  if (std::abs(d.y()) > 1e-12) {
    const double t = -o.y() / d.y();
    if (t > 1e-9 && o.z() + t * d.z() <= ramp_start_) {
      best = {Surface::Road, t, o + t * d, Vec3(0, 1, 0), Vec3::Zero()};
    }
  }
  {
    // y = s (z - z0)  <=>  (o.y + t d.y) - s (o.z + t d.z - z0) = 0
    const double denom = d.y() - ramp_slope_ * d.z();
    if (std::abs(denom) > 1e-12) {
      const double t = -(o.y() - ramp_slope_ * (o.z() - ramp_start_)) / denom;
      if (t > 1e-9 && o.z() + t * d.z() > ramp_start_ && t < best.t) {
        best = {Surface::Road, t, o + t * d, road_normal(ramp_start_ + 1.0), Vec3::Zero()};
      }
    }
  }
  for (const auto& b : boxes_) {
    double t;
    Vec3 n;
    if (hit_box(o, d, b.lo, b.hi, t, n) && t < best.t) best = {Surface::Object, t, o + t * d, n, b.albedo};
  }
  for (const auto& e : ellipsoids_) {
    double t;
    Vec3 n;
    if (hit_ellipsoid(o, d, e.center, e.radii, t, n) && t < best.t) {
      best = {Surface::Object, t, o + t * d, n, e.albedo};
    }
  }
  if (best.t == kInf) best = Hit{};
  return best;
}

Vec3 SynthWorld::shade(const Hit& hit, const Vec3& dir) const {
  if (hit.surface == Surface::Sky) {
    const double elev = std::max(0.0, dir.y());
    const double t = std::sqrt(elev);
    const Vec3 horizon(0.78, 0.84, 0.92), zenith(0.30, 0.50, 0.85);
    const double az = 0.04 * std::sin(3.0 * std::atan2(dir.x(), dir.z()));
    return (1.0 - t) * horizon + t * zenith + Vec3(az, az, 0.0);
  }
  const Vec3 light = Vec3(0.4, 0.8, -0.45).normalized();
  const double lambert = 0.55 + 0.45 * std::max(0.0, hit.normal.dot(light));
  if (hit.surface == Surface::Road) {
    const double x = hit.point.x(), z = hit.point.z();
    const bool asphalt = std::abs(x) < kRoadHalfWidth;
    Vec3 base = asphalt ? Vec3(0.36, 0.36, 0.38) : Vec3(0.62, 0.58, 0.52);
    const double n = noise(x, z, 0.8) - 0.5;
    return (base + Vec3::Constant(0.12 * n)) * lambert;
  }
  // Objects: albedo modulated by a coarse texture in the two in-face coordinates.
  const Vec3& p = hit.point;
  double a, b;
  if (std::abs(hit.normal.x()) > 0.9) {
    a = p.z(); b = p.y();
  } else if (std::abs(hit.normal.y()) > 0.9) {
    a = p.x(); b = p.z();
  } else {
    a = p.x(); b = p.y();
  }
  const double n = noise(a + 100.0, b + 100.0, 0.7) - 0.5;
  return (hit.albedo + Vec3::Constant(0.15 * n)) * lambert;
}

Intrinsics synth_intrinsics(const SynthOptions& opts) {
  Intrinsics k;
  k.width = opts.width;
  k.height = opts.height;
  k.fx = k.fy = 0.78 * opts.width;
  k.cx = 0.5 * (opts.width - 1);
  k.cy = 0.5 * (opts.height - 1);
  return k;
}

Pose synth_camera_pose(const SynthOptions& opts, int index) {
  const double yaw = opts.max_yaw_deg * std::numbers::pi / 180.0 * std::sin(0.35 * index);
  const Vec3 forward(std::sin(yaw), 0.0, std::cos(yaw));
  const Vec3 up(0, 1, 0);
  const Vec3 x_c = forward.cross(up).normalized();
  const Vec3 y_c = forward.cross(x_c);
  Pose pose;
  pose.rotation.col(0) = x_c;
  pose.rotation.col(1) = y_c;
  pose.rotation.col(2) = forward;
  pose.translation = Vec3(0.0, opts.camera_height, opts.speed * index);
  return pose;
}

SynthDataset synth_scene(const SynthOptions& opts) {
  return synth_scene(opts, SynthWorld(opts.seed, opts));
}

SynthDataset synth_scene(const SynthOptions& opts, const SynthWorld& world) {
  SynthDataset data;
  data.intrinsics = synth_intrinsics(opts);
  const Intrinsics& k = data.intrinsics;
  // LiDAR beams only look a few degrees below the horizon and lower.
  data.lidar_cutoff_row = static_cast<int>(std::ceil(k.cy + k.fy * std::tan(2.0 * std::numbers::pi / 180.0)));

  const int ss = std::max(1, opts.supersample);
  for (int idx = 0; idx < opts.n_frames; ++idx) {
    Frame f;
    f.index = idx;
    f.intrinsics = k;
    f.pose = synth_camera_pose(opts, idx);
    f.rgb = Image(k.width, k.height, 3);
    Image depth(k.width, k.height, 1);
    Mask sky(k.width, k.height);
    const Vec3 origin = f.pose.center();

    for (int v = 0; v < k.height; ++v) {
      for (int u = 0; u < k.width; ++u) {
        const Vec3 ray_c = k.ray(u, v);
        const Vec3 dir = (f.pose.rotation * ray_c).normalized();
        const auto hit = world.intersect(origin, dir);
        if (hit.surface == SynthWorld::Surface::Sky) {
          sky.set(u, v, true);
        } else {
          depth.at(u, v) = f.pose.to_camera(hit.point).z();
        }
        Vec3 acc = Vec3::Zero();
        for (int sy = 0; sy < ss; ++sy) {
          for (int sx = 0; sx < ss; ++sx) {
            const double du = (sx + 0.5) / ss - 0.5, dv = (sy + 0.5) / ss - 0.5;
            const Vec3 d = (f.pose.rotation * k.ray(u + du, v + dv)).normalized();
            acc += world.shade(world.intersect(origin, d), d);
          }
        }
        acc /= ss * ss;
        for (int c = 0; c < 3; ++c) {
          f.rgb.at(u, v, c) = std::round(std::clamp(acc[c], 0.0, 1.0) * 255.0) / 255.0;
        }
      }
    }

    for (int v = data.lidar_cutoff_row; v < k.height; v += opts.lidar_row_step) {
      for (int u = (v / opts.lidar_row_step) % 2; u < k.width; u += opts.lidar_col_step) {
        if (!sky.at(u, v)) f.sparse_depth.push_back({u, v, depth.at(u, v)});
      }
    }
    f.sky_mask = std::move(sky);
    f.gt_depth = std::move(depth);
    data.frames.push_back(std::move(f));
  }
  return data;
}

void write_dataset(const std::string& dir, const SynthDataset& data) {
  write_intrinsics(dir, data.intrinsics);
  for (const auto& f : data.frames) write_frame(dir, f);
}

}  // namespace streetsplat
