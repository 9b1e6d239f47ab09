#include "streetsplat/checkpoint.hpp"

#include "streetsplat/errors.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace streetsplat {

static_assert(std::endian::native == std::endian::little);

namespace {

constexpr char kMagic[8] = {'S', 'S', 'P', 'L', 'T', 'C', 'K', 'P'};

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename Derived>
void put_vec(std::ostream& out, const Eigen::MatrixBase<Derived>& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) put<double>(out, v[i]);
}

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  template <typename T>
  T get() {
    T v;
    in_.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in_) throw FormatError("checkpoint truncated");
    return v;
  }

  template <typename Derived>
  void get_vec(Eigen::MatrixBase<Derived>& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = get<double>();
  }

  std::uint64_t count(std::uint64_t limit = 1ULL << 32) {
    const auto n = get<std::uint64_t>();
    if (n > limit) throw FormatError("checkpoint count out of range");
    return n;
  }

 private:
  std::istream& in_;
};

}  // namespace

void save_checkpoint(const std::string& path, const HybridScene& scene) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kCheckpointVersion);
  std::ostringstream cfg;
  write_config(cfg, scene.config);
  const std::string text = cfg.str();
  put<std::uint64_t>(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));

  put<std::uint64_t>(out, scene.segments.size());
  for (const PlaneSegment& s : scene.segments) {
    put_vec(out, s.coefficients);
    put<std::int32_t>(out, s.first_frame);
    put<std::int32_t>(out, s.last_frame);
  }
  put<std::uint64_t>(out, scene.free.size());
  for (const FreeGaussian& g : scene.free) {
    put_vec(out, g.position);
    put_vec(out, g.log_scale);
    put_vec(out, g.color);
    put_vec(out, g.rotation);
    put<double>(out, g.opacity);
  }
  put<std::uint64_t>(out, scene.sky.size());
  for (const SphereGaussian& g : scene.sky) {
    put_vec(out, g.xz);
    put_vec(out, g.log_scale);
    put_vec(out, g.color);
    put<double>(out, g.opacity);
  }
  put<std::uint64_t>(out, scene.inlier.size());
  for (const PlaneGaussian& g : scene.inlier) {
    put_vec(out, g.xz);
    put_vec(out, g.log_scale);
    put_vec(out, g.color);
    put<double>(out, g.opacity);
    put<std::int32_t>(out, g.segment_id);
  }
  if (!out) throw std::runtime_error("failed writing " + path);
}

HybridScene load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw FormatError("not a checkpoint: " + path);
  Reader r(in);
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) throw FormatError("unsupported checkpoint version");
  const auto len = r.count(1 << 20);
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw FormatError("checkpoint truncated");

  HybridScene scene;
  std::istringstream cfg(text);
  scene.config = read_config(cfg);

  scene.segments.resize(r.count());
  for (PlaneSegment& s : scene.segments) {
    r.get_vec(s.coefficients);
    s.first_frame = r.get<std::int32_t>();
    s.last_frame = r.get<std::int32_t>();
  }
  scene.free.resize(r.count());
  for (FreeGaussian& g : scene.free) {
    r.get_vec(g.position);
    r.get_vec(g.log_scale);
    r.get_vec(g.color);
    r.get_vec(g.rotation);
    g.opacity = r.get<double>();
  }
  scene.sky.resize(r.count());
  for (SphereGaussian& g : scene.sky) {
    r.get_vec(g.xz);
    r.get_vec(g.log_scale);
    r.get_vec(g.color);
    g.opacity = r.get<double>();
  }
  scene.inlier.resize(r.count());
  for (PlaneGaussian& g : scene.inlier) {
    r.get_vec(g.xz);
    r.get_vec(g.log_scale);
    r.get_vec(g.color);
    g.opacity = r.get<double>();
    g.segment_id = r.get<std::int32_t>();
    if (g.segment_id < 0 || static_cast<std::size_t>(g.segment_id) >= scene.segments.size())
      throw FormatError("plane Gaussian refers to a missing segment");
  }
  return scene;
}

}  // namespace streetsplat
