#include "streetsplat/ingest.hpp"

#include "streetsplat/errors.hpp"
#include "streetsplat/image_io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace fs = std::filesystem;

namespace streetsplat {

std::string frame_dir(const std::string& dataset_dir, int index) {
  char name[16];
  std::snprintf(name, sizeof(name), "%06d", index);
  return (fs::path(dataset_dir) / "frames" / name).string();
}

Intrinsics read_intrinsics(const std::string& dataset_dir) {
  const auto path = fs::path(dataset_dir) / "intrinsics.txt";
  std::ifstream in(path);
  if (!in) throw FormatError("missing " + path.string());
  Intrinsics k;
  in >> k.fx >> k.fy >> k.cx >> k.cy >> k.width >> k.height;
  if (!in || k.fx <= 0 || k.fy <= 0 || k.width <= 0 || k.height <= 0) {
    throw FormatError("malformed " + path.string());
  }
  return k;
}

void write_intrinsics(const std::string& dataset_dir, const Intrinsics& k) {
  fs::create_directories(dataset_dir);
  std::ofstream out(fs::path(dataset_dir) / "intrinsics.txt");
  out << std::setprecision(17) << k.fx << ' ' << k.fy << ' ' << k.cx << ' ' << k.cy << ' '
      << k.width << ' ' << k.height << '\n';
}

void validate_frame(const Frame& f) {
  if (f.rgb.channels() != 3) throw FormatError("rgb must have 3 channels");
  if (f.rgb.width() != f.intrinsics.width || f.rgb.height() != f.intrinsics.height) {
    throw FormatError("rgb size does not match intrinsics");
  }
  const Mat3& r = f.pose.rotation;
  if (!((r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-6) ||
      std::abs(r.determinant() - 1.0) > 1e-6) {
    throw FormatError("pose rotation is not orthonormal");
  }
  for (const auto& s : f.sparse_depth) {
    if (!(s.depth > 0.0) || !std::isfinite(s.depth)) throw FormatError("nonpositive sparse depth");
    if (s.u < 0 || s.u >= f.width() || s.v < 0 || s.v >= f.height()) {
      throw FormatError("sparse depth sample outside the image");
    }
  }
  if (f.sky_mask && (f.sky_mask->width() != f.width() || f.sky_mask->height() != f.height())) {
    throw FormatError("sky mask size mismatch");
  }
}

Frame read_frame(const std::string& dataset_dir, int index) {
  const fs::path dir = frame_dir(dataset_dir, index);
  if (!fs::is_directory(dir)) throw MissingFrame(index);

  Frame f;
  f.index = index;
  f.intrinsics = read_intrinsics(dataset_dir);
  f.rgb = read_png((dir / "rgb.png").string());
  if (f.rgb.channels() != 3) throw FormatError(dir.string() + "/rgb.png is not RGB");

  {
    std::ifstream in(dir / "pose.txt");
    if (!in) throw FormatError("missing " + (dir / "pose.txt").string());
    Mat4 m;
    for (int i = 0; i < 16; ++i) in >> m(i / 4, i % 4);
    if (!in) throw FormatError("malformed " + (dir / "pose.txt").string());
    f.pose = Pose::from_matrix(m);
  }
  {
    std::ifstream in(dir / "sparse_depth.txt");
    if (!in) throw FormatError("missing " + (dir / "sparse_depth.txt").string());
    std::string line;
    while (std::getline(in, line)) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      std::istringstream is(line);
      DepthSample s;
      if (!(is >> s.u >> s.v >> s.depth)) {
        throw FormatError("malformed line in " + (dir / "sparse_depth.txt").string() + ": " + line);
      }
      f.sparse_depth.push_back(s);
    }
  }
  if (fs::exists(dir / "sky_mask.png")) {
    const Image m = read_png((dir / "sky_mask.png").string());
    Mask mask(m.width(), m.height());
    for (int y = 0; y < m.height(); ++y)
      for (int x = 0; x < m.width(); ++x) mask.set(x, y, m.at(x, y, 0) > 0.0);
    f.sky_mask = std::move(mask);
  }
  if (fs::exists(dir / "gt_depth.pfm")) f.gt_depth = read_pfm((dir / "gt_depth.pfm").string());

  validate_frame(f);
  return f;
}

void write_frame(const std::string& dataset_dir, const Frame& f) {
  const fs::path dir = frame_dir(dataset_dir, f.index);
  fs::create_directories(dir);
  write_png((dir / "rgb.png").string(), f.rgb);
  {
    std::ofstream out(dir / "pose.txt");
    out << std::setprecision(17);
    const Mat4 m = f.pose.matrix();
    for (int r = 0; r < 4; ++r) {
      out << m(r, 0) << ' ' << m(r, 1) << ' ' << m(r, 2) << ' ' << m(r, 3) << '\n';
    }
  }
  {
    std::ofstream out(dir / "sparse_depth.txt");
    out << std::setprecision(17);
    for (const auto& s : f.sparse_depth) out << s.u << ' ' << s.v << ' ' << s.depth << '\n';
  }
  if (f.sky_mask) {
    Image m(f.sky_mask->width(), f.sky_mask->height(), 1);
    for (int y = 0; y < m.height(); ++y)
      for (int x = 0; x < m.width(); ++x) m.at(x, y) = f.sky_mask->at(x, y) ? 1.0 : 0.0;
    write_png((dir / "sky_mask.png").string(), m);
  }
  if (f.gt_depth) write_pfm((dir / "gt_depth.pfm").string(), *f.gt_depth);
}

int count_frames(const std::string& dataset_dir) {
  int n = 0;
  while (fs::is_directory(frame_dir(dataset_dir, n))) ++n;
  return n;
}

}  // namespace streetsplat
