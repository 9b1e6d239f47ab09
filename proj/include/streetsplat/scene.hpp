#pragma once

#include "streetsplat/config.hpp"
#include "streetsplat/math.hpp"

#include <cstdint>
#include <vector>

namespace streetsplat {

/// Unconstrained ellipsoid for roadside structure.
struct FreeGaussian {
  static constexpr int kLearnables = 14;

  Vec3 position = Vec3::Zero();    // m, world frame
  Vec3 log_scale = Vec3::Zero();   // log of per-axis std-dev, m
  Vec3 color = Vec3::Zero();       // RGB in [0,1]
  Quat rotation = identity_quat(); // (w,x,y,z)
  double opacity = 0.0;            // logit
};

/// Gaussian pinned to the camera-centered sky sphere. Only (x, z) is stored;
/// y is implied by the sphere and the thickness axis is radial.
struct SphereGaussian {
  static constexpr int kLearnables = 8;

  Vec2 xz = Vec2::Zero();          // m, sky frame
  Vec2 log_scale = Vec2::Zero();   // log of (s_x, s_z)
  Vec3 color = Vec3::Zero();
  double opacity = 0.0;
};

/// Flattened Gaussian lying on one road-plane segment.
struct PlaneGaussian {
  static constexpr int kLearnables = 8;

  Vec2 xz = Vec2::Zero();          // m, world frame
  Vec2 log_scale = Vec2::Zero();
  Vec3 color = Vec3::Zero();
  double opacity = 0.0;
  int segment_id = 0;
};

/// Road plane A x + B y + C z + D = 0 with |(A,B,C)| = 1 and B > 0.
struct PlaneSegment {
  Vec4 coefficients = Vec4(0.0, 1.0, 0.0, 0.0);
  int first_frame = 0;
  int last_frame = 0;

  Vec3 normal() const { return coefficients.head<3>(); }
  double signed_distance(const Vec3& p) const { return normal().dot(p) + coefficients[3]; }
  bool covers(int frame) const { return frame >= first_frame && frame <= last_frame; }
};

struct HybridScene {
  std::vector<FreeGaussian> free;
  std::vector<SphereGaussian> sky;
  std::vector<PlaneGaussian> inlier;
  std::vector<PlaneSegment> segments;
  SceneConfig config;

  std::size_t size() const { return free.size() + sky.size() + inlier.size(); }
};

/// Full 3D description of a Gaussian after applying its family constraints.
struct LiftedGaussian {
  Vec3 position;
  Quat rotation;
  Vec3 scale;
};

/// Lifts a sphere Gaussian into the sky frame. Throws DomainError outside the
/// disc x^2 + z^2 < R^2.
LiftedGaussian lift_sphere(const SphereGaussian& g, double radius, double thickness);

/// Lifts a plane Gaussian onto its segment. Throws DomainError for |B| < 1e-9.
LiftedGaussian lift_plane(const PlaneGaussian& g, const PlaneSegment& seg, double thickness);

/// Derivatives of a lift with respect to the stored (x, z).
struct LiftJacobian {
  Eigen::Matrix<double, 3, 2> d_position;
  Eigen::Matrix<double, 4, 2> d_rotation;
};

LiftJacobian lift_sphere_jacobian(const SphereGaussian& g, double radius);
LiftJacobian lift_plane_jacobian(const PlaneSegment& seg);

/// Unit quaternion of the minimal rotation taking (0,1,0) onto unit vector n.
Quat align_y_to(const Vec3& n);

/// Sigma = R diag(s)^2 R^T, symmetrized and with eigenvalues clamped at zero.
Mat3 materialize_covariance(const Quat& rotation, const Vec3& scale);

/// Pulls xz back into the disc of radius 0.999 R.
void project_into_disc(SphereGaussian& g, double radius);

/// Bookkeeping for structural edits: for each Gaussian of the edited scene,
/// the index it had before the edit, or -1 if it is new.
struct FamilyRemap {
  std::vector<int> free;
  std::vector<int> sky;
  std::vector<int> inlier;

  static FamilyRemap identity(const HybridScene& scene);
  /// Composition: apply `first`, then `second`.
  static FamilyRemap chain(const FamilyRemap& first, const FamilyRemap& second);
};

/// Reorders a per-Gaussian array according to a remap; new entries get `fill`.
template <typename T>
std::vector<T> apply_remap(const std::vector<T>& old, const std::vector<int>& map, const T& fill) {
  std::vector<T> out;
  out.reserve(map.size());
  for (int src : map) out.push_back(src >= 0 && static_cast<std::size_t>(src) < old.size() ? old[src] : fill);
  return out;
}

/// Order-sensitive hash of every learnable parameter and segment.
std::uint64_t fingerprint(const HybridScene& scene);

}  // namespace streetsplat
