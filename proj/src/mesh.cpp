#include "streetsplat/mesh.hpp"

#include "streetsplat/errors.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace streetsplat {

TsdfVolume::TsdfVolume(const Vec3& origin, double voxel_size, const std::array<int, 3>& dims)
    : origin_(origin), voxel_(voxel_size), dims_(dims) {
  if (!(voxel_size > 0.0) || dims[0] <= 0 || dims[1] <= 0 || dims[2] <= 0)
    throw DomainError("invalid TSDF grid");
  const std::size_t n = static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  tsdf_.assign(n, 1.0f);
  weight_.assign(n, 0.0f);
}

TsdfVolume TsdfVolume::covering(const Vec3& lo, const Vec3& hi, double voxel_size) {
  std::array<int, 3> dims{};
  for (int a = 0; a < 3; ++a)
    dims[a] = std::max(2, static_cast<int>(std::ceil((hi[a] - lo[a]) / voxel_size)) + 1);
  return TsdfVolume(lo, voxel_size, dims);
}

std::size_t TsdfVolume::observed() const {
  return static_cast<std::size_t>(std::count_if(weight_.begin(), weight_.end(), [](float w) { return w > 0.0f; }));
}

void integrate(TsdfVolume& volume, const Image& depth, const Pose& pose, const Intrinsics& k) {
  const auto& dims = volume.dims();
  const double trunc = volume.truncation();
  const double cap = volume.max_weight();
  const int W = depth.width();
  const int H = depth.height();
#pragma omp parallel for schedule(static)
  for (int kz = 0; kz < dims[2]; ++kz) {
    for (int j = 0; j < dims[1]; ++j) {
      for (int i = 0; i < dims[0]; ++i) {
        const Vec3 p = pose.to_camera(volume.position(i, j, kz));
        if (p.z() <= 0.0) continue;
        const Vec2 uv = k.project(p);
        const long u = std::lround(uv.x());
        const long v = std::lround(uv.y());
        if (u < 0 || v < 0 || u >= W || v >= H) continue;
        const double d = depth.at(static_cast<int>(u), static_cast<int>(v));
        if (!(d > 0.0)) continue;
        const double sdf = d - p.z();
        if (sdf < -trunc) continue;
        const double val = std::min(1.0, sdf / trunc);
        const double w = volume.weight(i, j, kz);
        const double t = volume.tsdf(i, j, kz);
        const double nt = (t * w + val) / (w + 1.0);
        volume.set(i, j, kz, static_cast<float>(nt), static_cast<float>(std::min(w + 1.0, cap)));
      }
    }
  }
}

namespace {

// Cube corner c sits at offset (c & 1, c >> 1 & 1, c >> 2 & 1).
Vec3 corner_offset(int c) { return Vec3(c & 1, (c >> 1) & 1, (c >> 2) & 1); }

struct Edge {
  int a, b;  // corners, b = a + (1 << axis)
  int axis;
};

// Per sign configuration, closed loops of cube-edge indices.
struct CaseTable {
  std::array<Edge, 12> edges;
  std::array<std::vector<std::vector<int>>, 256> loops;
};

int edge_between(const std::array<Edge, 12>& edges, int p, int q) {
  for (int e = 0; e < 12; ++e)
    if ((edges[e].a == p && edges[e].b == q) || (edges[e].a == q && edges[e].b == p)) return e;
  return -1;
}

CaseTable build_table() {
  CaseTable t;
  int n = 0;
  for (int c = 0; c < 8; ++c)
    for (int axis = 0; axis < 3; ++axis)
      if (!(c & (1 << axis))) t.edges[n++] = {c, c | (1 << axis), axis};

  // Faces with corners counter-clockwise seen from outside the cube.
  std::vector<std::array<int, 4>> faces;
  for (int axis = 0; axis < 3; ++axis) {
    for (int side = 0; side < 2; ++side) {
      std::vector<int> cs;
      for (int c = 0; c < 8; ++c)
        if (((c >> axis) & 1) == side) cs.push_back(c);
      Vec3 normal = Vec3::Zero();
      normal[axis] = side ? 1.0 : -1.0;
      Vec3 center = Vec3::Zero();
      for (int c : cs) center += corner_offset(c);
      center /= 4.0;
      const Vec3 ref = corner_offset(cs[0]) - center;
      auto angle = [&](int c) {
        const Vec3 d = corner_offset(c) - center;
        return std::atan2(normal.dot(ref.cross(d)), ref.dot(d));
      };
      std::sort(cs.begin(), cs.end(), [&](int p, int q) { return angle(p) < angle(q); });
      faces.push_back({cs[0], cs[1], cs[2], cs[3]});
    }
  }

  for (int mask = 0; mask < 256; ++mask) {
    auto pos = [&](int c) { return (mask >> c) & 1; };
    // Each face contributes segments from a negative-to-positive crossing to
    // the next positive-to-negative crossing, walking counter-clockwise. This
    // keeps diagonally opposite positive corners apart on ambiguous faces and
    // is the same pairing whichever side the face is viewed from.
    std::array<int, 12> next;
    next.fill(-1);
    for (const auto& f : faces) {
      for (int s = 0; s < 4; ++s) {
        const int p = f[s], q = f[(s + 1) % 4];
        if (pos(p) || !pos(q)) continue;
        for (int r = 1; r < 4; ++r) {
          const int p2 = f[(s + r) % 4], q2 = f[(s + r + 1) % 4];
          if (pos(p2) && !pos(q2)) {
            next[edge_between(t.edges, p, q)] = edge_between(t.edges, p2, q2);
            break;
          }
        }
      }
    }
    std::array<bool, 12> used{};
    for (int e = 0; e < 12; ++e) {
      if (next[e] < 0 || used[e]) continue;
      std::vector<int> loop;
      int cur = e;
      while (!used[cur]) {
        used[cur] = true;
        loop.push_back(cur);
        cur = next[cur];
      }
      t.loops[mask].push_back(loop);
    }
  }

  // Orient every loop so its normal points toward the positive side, using
  // the single-positive-corner case as reference.
  const auto& ref = t.loops[1][0];
  auto mid = [&](int e) -> Vec3 { return 0.5 * (corner_offset(t.edges[e].a) + corner_offset(t.edges[e].b)); };
  const Vec3 nrm = (mid(ref[1]) - mid(ref[0])).cross(mid(ref[2]) - mid(ref[0]));
  if (nrm.dot(corner_offset(0) - mid(ref[0])) < 0.0)
    for (auto& loops : t.loops)
      for (auto& loop : loops) std::reverse(loop.begin(), loop.end());
  return t;
}

const CaseTable& case_table() {
  static const CaseTable table = build_table();
  return table;
}

}  // namespace

TriangleMesh extract_mesh(const TsdfVolume& volume) {
  const CaseTable& table = case_table();
  const auto& dims = volume.dims();
  TriangleMesh mesh;
  std::unordered_map<std::uint64_t, int> vertex_of_edge;

  auto global_edge = [&](int i, int j, int k, int axis) {
    return static_cast<std::uint64_t>(volume.index(i, j, k)) * 3 + axis;
  };

  for (int k = 0; k + 1 < dims[2]; ++k) {
    for (int j = 0; j + 1 < dims[1]; ++j) {
      for (int i = 0; i + 1 < dims[0]; ++i) {
        std::array<float, 8> val;
        bool observed = true;
        int mask = 0;
        for (int c = 0; c < 8; ++c) {
          const int ci = i + (c & 1), cj = j + ((c >> 1) & 1), ck = k + ((c >> 2) & 1);
          if (volume.weight(ci, cj, ck) <= 0.0f) {
            observed = false;
            break;
          }
          val[c] = volume.tsdf(ci, cj, ck);
          if (val[c] >= 0.0f) mask |= 1 << c;
        }
        if (!observed || mask == 0 || mask == 255) continue;

        auto vertex = [&](int e) {
          const Edge& ed = table.edges[e];
          const int ai = i + (ed.a & 1), aj = j + ((ed.a >> 1) & 1), ak = k + ((ed.a >> 2) & 1);
          const std::uint64_t key = global_edge(ai, aj, ak, ed.axis);
          auto it = vertex_of_edge.find(key);
          if (it != vertex_of_edge.end()) return it->second;
          const double va = val[ed.a], vb = val[ed.b];
          const double t = va / (va - vb);
          Vec3 p = volume.position(ai, aj, ak);
          p[ed.axis] += t * volume.voxel_size();
          mesh.vertices.push_back(p);
          const int id = static_cast<int>(mesh.vertices.size()) - 1;
          vertex_of_edge.emplace(key, id);
          return id;
        };

        for (const auto& loop : table.loops[mask]) {
          std::vector<int> ids;
          ids.reserve(loop.size());
          for (int e : loop) ids.push_back(vertex(e));
          for (std::size_t s = 1; s + 1 < ids.size(); ++s) mesh.faces.push_back({ids[0], ids[s], ids[s + 1]});
        }
      }
    }
  }
  if (mesh.faces.empty()) throw EmptyVolume("no observed zero crossing");
  return mesh;
}

void write_ply(const std::string& path, const TriangleMesh& mesh) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "ply\nformat binary_little_endian 1.0\n"
      << "element vertex " << mesh.vertices.size() << "\n"
      << "property float x\nproperty float y\nproperty float z\n"
      << "element face " << mesh.faces.size() << "\n"
      << "property list uchar int vertex_indices\nend_header\n";
  static_assert(std::endian::native == std::endian::little);
  for (const Vec3& v : mesh.vertices) {
    const float xyz[3] = {static_cast<float>(v.x()), static_cast<float>(v.y()), static_cast<float>(v.z())};
    out.write(reinterpret_cast<const char*>(xyz), sizeof(xyz));
  }
  for (const auto& f : mesh.faces) {
    const unsigned char n = 3;
    const std::int32_t idx[3] = {f[0], f[1], f[2]};
    out.write(reinterpret_cast<const char*>(&n), 1);
    out.write(reinterpret_cast<const char*>(idx), sizeof(idx));
  }
}

TriangleMesh read_ply(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  std::string line;
  std::size_t nv = 0, nf = 0;
  bool binary = false;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    std::string tok;
    ss >> tok;
    if (tok == "format") {
      std::string fmt;
      ss >> fmt;
      binary = fmt == "binary_little_endian";
    } else if (tok == "element") {
      std::string what;
      std::size_t n;
      ss >> what >> n;
      (what == "vertex" ? nv : nf) = n;
    } else if (tok == "end_header") {
      break;
    }
  }
  if (!binary) throw FormatError("expected binary little-endian PLY");
  TriangleMesh mesh;
  mesh.vertices.resize(nv);
  for (auto& v : mesh.vertices) {
    float xyz[3];
    in.read(reinterpret_cast<char*>(xyz), sizeof(xyz));
    v = Vec3(xyz[0], xyz[1], xyz[2]);
  }
  mesh.faces.resize(nf);
  for (auto& f : mesh.faces) {
    unsigned char n = 0;
    std::int32_t idx[3];
    in.read(reinterpret_cast<char*>(&n), 1);
    if (n != 3) throw FormatError("non-triangle face");
    in.read(reinterpret_cast<char*>(idx), sizeof(idx));
    f = {idx[0], idx[1], idx[2]};
  }
  if (!in) throw FormatError("truncated PLY");
  return mesh;
}

long euler_characteristic(const TriangleMesh& mesh) {
  std::unordered_set<std::uint64_t> edges;
  for (const auto& f : mesh.faces) {
    for (int s = 0; s < 3; ++s) {
      const std::uint64_t a = static_cast<std::uint32_t>(f[s]);
      const std::uint64_t b = static_cast<std::uint32_t>(f[(s + 1) % 3]);
      edges.insert(std::min(a, b) << 32 | std::max(a, b));
    }
  }
  return static_cast<long>(mesh.vertices.size()) - static_cast<long>(edges.size()) +
         static_cast<long>(mesh.faces.size());
}

}  // namespace streetsplat
