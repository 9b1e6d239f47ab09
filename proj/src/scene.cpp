#include "streetsplat/scene.hpp"

#include "streetsplat/errors.hpp"

#include <Eigen/Eigenvalues>

#include <cstring>

namespace streetsplat {

Mat3 rotation_matrix(const Quat& q_raw) {
  const Quat q = q_raw / q_raw.norm();
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  Mat3 r;
  r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
      2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
      2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return r;
}

Quat rotation_matrix_vjp(const Quat& q_raw, const Mat3& g) {
  const double n = q_raw.norm();
  const Quat q = q_raw / n;
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  // dL/dq for the unit quaternion.
  Quat d;
  d[0] = 2 * (-z * g(0, 1) + y * g(0, 2) + z * g(1, 0) - x * g(1, 2) - y * g(2, 0) + x * g(2, 1));
  d[1] = 2 * (y * g(0, 1) + z * g(0, 2) + y * g(1, 0) - 2 * x * g(1, 1) - w * g(1, 2) +
              z * g(2, 0) + w * g(2, 1) - 2 * x * g(2, 2));
  d[2] = 2 * (-2 * y * g(0, 0) + x * g(0, 1) + w * g(0, 2) + x * g(1, 0) + z * g(1, 2) -
              w * g(2, 0) + z * g(2, 1) - 2 * y * g(2, 2));
  d[3] = 2 * (-2 * z * g(0, 0) - w * g(0, 1) + x * g(0, 2) + w * g(1, 0) - 2 * z * g(1, 1) +
              y * g(1, 2) + x * g(2, 0) + y * g(2, 1));
  // Through q = q_raw / |q_raw|.
  return (d - q * q.dot(d)) / n;
}

Quat align_y_to(const Vec3& n) {
  // q ~ (1 + y.n, y x n) for the unit y axis.
  Quat u(1.0 + n.y(), n.z(), 0.0, -n.x());
  const double len = u.norm();
  if (len < 1e-12) {
    // n = -y: half turn about x.
    return Quat(0.0, 1.0, 0.0, 0.0);
  }
  return u / len;
}

LiftedGaussian lift_sphere(const SphereGaussian& g, double radius, double thickness) {
  const double rho2 = g.xz.squaredNorm();
  const double r2 = radius * radius;
  if (!(rho2 < r2)) throw DomainError("sphere Gaussian xz outside the sky disc");
  const double y = std::sqrt(r2 - rho2);
  const Vec3 p(g.xz.x(), y, g.xz.y());
  return {p, align_y_to(p / radius),
          Vec3(std::exp(g.log_scale.x()), thickness, std::exp(g.log_scale.y()))};
}

LiftedGaussian lift_plane(const PlaneGaussian& g, const PlaneSegment& seg, double thickness) {
  const Vec4& c = seg.coefficients;
  if (std::abs(c[1]) < 1e-9) throw DomainError("vertical road plane (B = 0)");
  const double x = g.xz.x(), z = g.xz.y();
  const double y = (-c[0] * x - c[2] * z - c[3]) / c[1];
  const Vec3 n = seg.normal().normalized();
  return {Vec3(x, y, z), align_y_to(n),
          Vec3(std::exp(g.log_scale.x()), thickness, std::exp(g.log_scale.y()))};
}

LiftJacobian lift_sphere_jacobian(const SphereGaussian& g, double radius) {
  const double x = g.xz.x(), z = g.xz.y();
  const double y = std::sqrt(radius * radius - x * x - z * z);
  const double dy_dx = -x / y;
  const double dy_dz = -z / y;

  LiftJacobian jac;
  jac.d_position << 1.0, 0.0, dy_dx, dy_dz, 0.0, 1.0;

  // q = u / |u| with u = (1 + y/R, z/R, 0, -x/R).
  const Quat u(1.0 + y / radius, z / radius, 0.0, -x / radius);
  const double len = u.norm();
  const Quat q = u / len;
  const Quat du_dx(dy_dx / radius, 0.0, 0.0, -1.0 / radius);
  const Quat du_dz(dy_dz / radius, 1.0 / radius, 0.0, 0.0);
  jac.d_rotation.col(0) = (du_dx - q * q.dot(du_dx)) / len;
  jac.d_rotation.col(1) = (du_dz - q * q.dot(du_dz)) / len;
  return jac;
}

LiftJacobian lift_plane_jacobian(const PlaneSegment& seg) {
  const Vec4& c = seg.coefficients;
  if (std::abs(c[1]) < 1e-9) throw DomainError("vertical road plane (B = 0)");
  LiftJacobian jac;
  jac.d_position << 1.0, 0.0, -c[0] / c[1], -c[2] / c[1], 0.0, 1.0;
  jac.d_rotation.setZero();
  return jac;
}

Mat3 materialize_covariance(const Quat& rotation, const Vec3& scale) {
  const Mat3 r = rotation_matrix(rotation);
  const Mat3 m = r * scale.asDiagonal();
  Mat3 sigma = m * m.transpose();
  sigma = 0.5 * (sigma + sigma.transpose());
  return sigma;
}

void project_into_disc(SphereGaussian& g, double radius) {
  const double limit = 0.999 * radius;
  const double rho = g.xz.norm();
  if (rho >= limit) g.xz *= limit / rho;
}

FamilyRemap FamilyRemap::identity(const HybridScene& scene) {
  FamilyRemap r;
  auto iota = [](std::size_t n) {
    std::vector<int> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = static_cast<int>(i);
    return v;
  };
  r.free = iota(scene.free.size());
  r.sky = iota(scene.sky.size());
  r.inlier = iota(scene.inlier.size());
  return r;
}

FamilyRemap FamilyRemap::chain(const FamilyRemap& first, const FamilyRemap& second) {
  auto compose = [](const std::vector<int>& a, const std::vector<int>& b) {
    std::vector<int> out(b.size());
    for (std::size_t i = 0; i < b.size(); ++i) out[i] = b[i] >= 0 ? a[b[i]] : -1;
    return out;
  };
  return {compose(first.free, second.free), compose(first.sky, second.sky),
          compose(first.inlier, second.inlier)};
}

namespace {

struct Fnv {
  std::uint64_t h = 1469598103934665603ULL;
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 1099511628211ULL;
    }
  }
  template <typename T>
  void value(const T& v) {
    bytes(&v, sizeof(T));
  }
  template <typename Derived>
  void matrix(const Eigen::MatrixBase<Derived>& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) value(m.derived().data()[i]);
  }
};

}  // namespace

std::uint64_t fingerprint(const HybridScene& scene) {
  Fnv f;
  f.value(scene.free.size());
  for (const auto& g : scene.free) {
    f.matrix(g.position);
    f.matrix(g.log_scale);
    f.matrix(g.color);
    f.matrix(g.rotation);
    f.value(g.opacity);
  }
  f.value(scene.sky.size());
  for (const auto& g : scene.sky) {
    f.matrix(g.xz);
    f.matrix(g.log_scale);
    f.matrix(g.color);
    f.value(g.opacity);
  }
  f.value(scene.inlier.size());
  for (const auto& g : scene.inlier) {
    f.matrix(g.xz);
    f.matrix(g.log_scale);
    f.matrix(g.color);
    f.value(g.opacity);
    f.value(g.segment_id);
  }
  f.value(scene.segments.size());
  for (const auto& s : scene.segments) f.matrix(s.coefficients);
  f.value(scene.config.sky_radius);
  f.value(scene.config.sky_thickness);
  f.value(scene.config.plane_thickness);
  f.value(scene.config.sort_inliers);
  return f.h;
}

}  // namespace streetsplat
