#pragma once

#include "streetsplat/image.hpp"
#include "streetsplat/math.hpp"

#include <array>
#include <string>
#include <vector>

namespace streetsplat {

/// Truncated signed distance grid. Samples sit at origin + (i, j, k) * voxel;
/// weight 0 marks an unobserved sample.
class TsdfVolume {
 public:
  TsdfVolume() = default;
  TsdfVolume(const Vec3& origin, double voxel_size, const std::array<int, 3>& dims);

  /// Grid covering [lo, hi] with the given spacing.
  static TsdfVolume covering(const Vec3& lo, const Vec3& hi, double voxel_size);

  const Vec3& origin() const { return origin_; }
  double voxel_size() const { return voxel_; }
  const std::array<int, 3>& dims() const { return dims_; }
  double truncation() const { return 4.0 * voxel_; }
  double max_weight() const { return 64.0; }

  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(k) * dims_[1] + j) * dims_[0] + i;
  }
  Vec3 position(int i, int j, int k) const { return origin_ + voxel_ * Vec3(i, j, k); }

  float tsdf(int i, int j, int k) const { return tsdf_[index(i, j, k)]; }
  float weight(int i, int j, int k) const { return weight_[index(i, j, k)]; }
  void set(int i, int j, int k, float tsdf, float weight) {
    tsdf_[index(i, j, k)] = tsdf;
    weight_[index(i, j, k)] = weight;
  }
  std::size_t size() const { return tsdf_.size(); }
  std::size_t observed() const;

 private:
  Vec3 origin_ = Vec3::Zero();
  double voxel_ = 0.1;
  std::array<int, 3> dims_{0, 0, 0};
  std::vector<float> tsdf_;
  std::vector<float> weight_;
};

/// Projective update from one z-depth image (0 = invalid) seen from a
/// camera->world pose. Samples more than one truncation band behind the
/// observed surface are left untouched.
void integrate(TsdfVolume& volume, const Image& depth, const Pose& pose, const Intrinsics& k);

struct TriangleMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> faces;
};

/// Marching cubes at tsdf = 0 over cubes whose eight samples are observed.
/// Shared edges yield shared vertices; faces wind counter-clockwise seen from
/// the positive (free-space) side. Throws EmptyVolume when nothing is found.
TriangleMesh extract_mesh(const TsdfVolume& volume);

/// Little-endian binary PLY with float positions and int triangle indices.
void write_ply(const std::string& path, const TriangleMesh& mesh);
TriangleMesh read_ply(const std::string& path);

/// V - E + F.
long euler_characteristic(const TriangleMesh& mesh);

}  // namespace streetsplat
