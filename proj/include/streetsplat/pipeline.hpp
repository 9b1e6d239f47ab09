#pragma once

#include "streetsplat/adapt.hpp"
#include "streetsplat/config.hpp"
#include "streetsplat/ingest.hpp"
#include "streetsplat/keyframes.hpp"
#include "streetsplat/losses.hpp"
#include "streetsplat/matching.hpp"
#include "streetsplat/mesh.hpp"
#include "streetsplat/optimizer.hpp"
#include "streetsplat/plane.hpp"
#include "streetsplat/rasterizer.hpp"
#include "streetsplat/scene.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace streetsplat {

struct FrameRow {
  int frame = 0;
  double psnr = 0.0;
  double ssim = 0.0;
  double depth_mae = 0.0;
  double depth_rmse = 0.0;
  std::size_t n_free = 0;
  std::size_t n_inlier = 0;
  std::size_t n_sky = 0;
  double wall_ms = 0.0;
  std::uint64_t cmp_grouped = 0;
  std::uint64_t cmp_unified = 0;

  /// Equality on everything except wall time.
  bool same_result(const FrameRow& o) const;
};

struct RunReport {
  std::vector<FrameRow> rows;

  void write_csv(std::ostream& out) const;
  void write_csv(const std::string& path) const;
  std::string summary() const;
  bool same_result(const RunReport& o) const;
};

/// Quality of a scene rendered at one frame's pose.
FrameRow evaluate_frame(const HybridScene& scene, const Frame& frame);

/// The online loop: one call per incoming frame.
class Mapper {
 public:
  explicit Mapper(const SceneConfig& cfg);

  /// Replaces the default match_features() provider.
  void set_matcher(std::shared_ptr<const CorrespondenceProvider> matcher) { matcher_ = std::move(matcher); }
  /// Called after each optimization iteration with (iteration, loss total).
  void set_progress(std::function<void(int, double)> cb) { progress_ = std::move(cb); }

  /// Seeds, optimizes and adapts for one frame; frames must arrive in order.
  FrameRow process_frame(const Frame& frame);

  /// Runs `iterations` optimization steps over the keyframe list.
  void optimize(int iterations);

  const HybridScene& scene() const { return scene_; }
  HybridScene& scene() { return scene_; }
  const std::vector<Frame>& frames() const { return frames_; }
  const KeyframeList& keyframes() const { return keyframes_; }
  const ImportanceState& importance() const { return importance_; }
  const AdamOptimizer& optimizer() const { return adam_; }
  double depth_constant() const { return depth_constant_; }
  int iteration() const { return iteration_; }

  /// Applies a structural edit to the optimizer and statistics.
  void apply_remap(const FamilyRemap& map);

 private:
  void seed(const Frame& frame, const RenderOutput* prior);
  const Frame& frame_by_index(int index) const;

  HybridScene scene_;
  std::vector<Frame> frames_;
  std::vector<PointCloud> points_by_frame_;
  std::vector<int> anchors_;
  KeyframeList keyframes_;
  AdamOptimizer adam_;
  GradientBuffer grads_;
  ImportanceState importance_;
  std::mt19937_64 rng_;
  std::shared_ptr<const CorrespondenceProvider> matcher_;
  std::function<void(int, double)> progress_;
  double depth_constant_ = 0.0;
  int iteration_ = 0;
};

/// Maps every frame of a dataset directory; writes report.csv and
/// scene.ckpt into `out_dir` when it is non-empty. Throws MissingFrame(0) for
/// an empty dataset.
RunReport cmd_map(const std::string& dataset_dir, const SceneConfig& cfg, const std::string& out_dir,
                  std::ostream* log = nullptr);

/// Metrics of a checkpoint against every frame of a dataset.
RunReport cmd_eval(const std::string& checkpoint, const std::string& dataset_dir);

/// Renders each pose in `poses` (camera->world 4x4) to rgb_NNNNNN.png,
/// depth_NNNNNN.pfm and silhouette_NNNNNN.pfm. Returns the renders.
std::vector<RenderOutput> cmd_render(const std::string& checkpoint, const Intrinsics& k,
                                     const std::vector<Pose>& poses, const std::string& out_dir);

struct MeshOptions {
  double voxel_size = 0.1;
  double max_depth = 20.0;  // m, depth beyond this is ignored
};

/// Fuses silhouette-filtered renders at the given poses and extracts a mesh.
/// Kept depths are divided by their silhouette before integration.
TriangleMesh fuse_mesh(const HybridScene& scene, const Intrinsics& k, const std::vector<Pose>& poses,
                       const MeshOptions& opts);

/// fuse_mesh at every dataset pose, written as PLY. Throws EmptyVolume.
TriangleMesh cmd_mesh(const std::string& checkpoint, const std::string& dataset_dir, const std::string& ply_path,
                      const MeshOptions& opts = {});

}  // namespace streetsplat
