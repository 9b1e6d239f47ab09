#pragma once

#include "streetsplat/image.hpp"
#include "streetsplat/math.hpp"

#include <optional>
#include <string>
#include <vector>

namespace streetsplat {

struct DepthSample {
  int u = 0;
  int v = 0;
  double depth = 0.0;  // m, camera-frame z
};

/// One timestep of the input stream.
struct Frame {
  int index = 0;
  Image rgb;                        // H x W x 3 in [0,1]
  std::vector<DepthSample> sparse_depth;
  Pose pose;                        // camera -> world
  Intrinsics intrinsics;
  std::optional<Mask> sky_mask;
  std::optional<Image> gt_depth;    // synthetic data only; 0 = sky / no hit

  int width() const { return rgb.width(); }
  int height() const { return rgb.height(); }
};

/// Matched pixel pair between frame t and t+1.
struct Correspondence {
  Vec2 pixel_t = Vec2::Zero();
  Vec2 pixel_t1 = Vec2::Zero();
  double flow = 0.0;  // |pixel_t1 - pixel_t|, px

  static Correspondence make(const Vec2& a, const Vec2& b) { return {a, b, (b - a).norm()}; }
};

/// Dataset on disk:
///   intrinsics.txt                 fx fy cx cy W H
///   frames/NNNNNN/rgb.png          8-bit RGB
///   frames/NNNNNN/sparse_depth.txt lines "u v depth_m"
///   frames/NNNNNN/pose.txt         4x4 row-major camera->world
///   frames/NNNNNN/sky_mask.png     optional, nonzero = sky
///   frames/NNNNNN/gt_depth.pfm     optional ground-truth depth
Intrinsics read_intrinsics(const std::string& dataset_dir);
void write_intrinsics(const std::string& dataset_dir, const Intrinsics& k);

/// Throws MissingFrame when the frame directory is absent, FormatError when
/// any file is malformed or a Frame invariant is violated.
Frame read_frame(const std::string& dataset_dir, int index);
void write_frame(const std::string& dataset_dir, const Frame& frame);

/// Number of consecutive frames present starting at index 0.
int count_frames(const std::string& dataset_dir);

std::string frame_dir(const std::string& dataset_dir, int index);

/// Checks the Frame invariants; throws FormatError with a description.
void validate_frame(const Frame& frame);

}  // namespace streetsplat
