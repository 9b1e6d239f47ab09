#include "streetsplat/pipeline.hpp"

#include "streetsplat/checkpoint.hpp"
#include "streetsplat/errors.hpp"
#include "streetsplat/image_io.hpp"
#include "streetsplat/init.hpp"
#include "streetsplat/metrics.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace streetsplat {

bool FrameRow::same_result(const FrameRow& o) const {
  return frame == o.frame && psnr == o.psnr && ssim == o.ssim && depth_mae == o.depth_mae &&
         depth_rmse == o.depth_rmse && n_free == o.n_free && n_inlier == o.n_inlier && n_sky == o.n_sky &&
         cmp_grouped == o.cmp_grouped && cmp_unified == o.cmp_unified;
}

bool RunReport::same_result(const RunReport& o) const {
  if (rows.size() != o.rows.size()) return false;
  for (std::size_t i = 0; i < rows.size(); ++i)
    if (!rows[i].same_result(o.rows[i])) return false;
  return true;
}

void RunReport::write_csv(std::ostream& out) const {
  out << "frame,psnr,ssim,depth_mae,depth_rmse,n_free,n_inlier,n_sky,wall_ms,cmp_grouped,cmp_unified\n";
  out << std::setprecision(17);
  for (const FrameRow& r : rows) {
    out << r.frame << ',' << r.psnr << ',' << r.ssim << ',' << r.depth_mae << ',' << r.depth_rmse << ','
        << r.n_free << ',' << r.n_inlier << ',' << r.n_sky << ',' << r.wall_ms << ',' << r.cmp_grouped << ','
        << r.cmp_unified << '\n';
  }
}

void RunReport::write_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  write_csv(out);
}

std::string RunReport::summary() const {
  std::ostringstream s;
  s << std::fixed << std::setprecision(3);
  s << "frame    psnr    ssim  depth_mae  depth_rmse   free  inlier    sky   wall_ms\n";
  for (const FrameRow& r : rows) {
    s << std::setw(5) << r.frame << std::setw(8) << r.psnr << std::setw(8) << r.ssim << std::setw(11)
      << r.depth_mae << std::setw(12) << r.depth_rmse << std::setw(7) << r.n_free << std::setw(8) << r.n_inlier
      << std::setw(7) << r.n_sky << std::setw(10) << std::setprecision(0) << r.wall_ms << std::setprecision(3)
      << '\n';
  }
  if (!rows.empty()) {
    const FrameRow& last = rows.back();
    const double saved = last.cmp_unified ? 100.0 * (1.0 - static_cast<double>(last.cmp_grouped) /
                                                               static_cast<double>(last.cmp_unified))
                                          : 0.0;
    s << "final: psnr " << last.psnr << " dB, ssim " << last.ssim << ", depth mae " << last.depth_mae
      << " m; grouped sort uses " << std::setprecision(1) << saved << "% fewer comparisons\n";
  }
  return s.str();
}

FrameRow evaluate_frame(const HybridScene& scene, const Frame& frame) {
  FrameRow row;
  row.frame = frame.index;
  RenderSettings settings = settings_for(scene);
  const RenderOutput out = render(scene, frame, settings);
  settings.unified_sort = true;
  const RenderOutput oracle = render(scene, frame, settings);
  row.psnr = psnr(out.color, frame.rgb);
  row.ssim = ssim_metric(out.color, frame.rgb);
  const DepthErrors de = depth_errors(out.depth, out.silhouette, frame.sparse_depth, scene.config.silhouette_filter);
  row.depth_mae = de.mae;
  row.depth_rmse = de.rmse;
  row.n_free = scene.free.size();
  row.n_inlier = scene.inlier.size();
  row.n_sky = scene.sky.size();
  row.cmp_grouped = out.sort_stats.comparisons;
  row.cmp_unified = oracle.sort_stats.comparisons;
  return row;
}

Mapper::Mapper(const SceneConfig& cfg) : adam_(cfg), rng_(cfg.seed) {
  validate(cfg);
  scene_.config = cfg;
}

const Frame& Mapper::frame_by_index(int index) const {
  for (const Frame& f : frames_)
    if (f.index == index) return f;
  throw MissingFrame(index);
}

void Mapper::apply_remap(const FamilyRemap& map) {
  adam_.remap(map);
  importance_.remap(map);
  remap_gradients(grads_, map);
}

void Mapper::seed(const Frame& frame, const RenderOutput* prior) {
  const SceneConfig& cfg = scene_.config;
  std::vector<DepthEstimate> estimates;
  if (frames_.size() >= 2) {
    const Frame& previous = frames_[frames_.size() - 2];
    const auto corrs = matcher_ ? matcher_->match(frame, previous) : match_features(frame, previous);
    estimates = estimate_depths(corrs, frame, previous, cfg, &depth_constant_);
  }

  // Road model input: every non-sky point of this frame, before gating.
  const std::vector<SeedPoint> all = gather_seeds(frame, estimates, nullptr, cfg);
  PointCloud cloud;
  cloud.reserve(all.size());
  for (const SeedPoint& p : all) cloud.push_back(p.world);
  if (static_cast<int>(points_by_frame_.size()) <= frame.index) points_by_frame_.resize(frame.index + 1);
  points_by_frame_[frame.index] = std::move(cloud);
  if (frame.index % cfg.keyframe_interval == 0 || scene_.segments.empty()) {
    if (anchors_.empty() || anchors_.back() != frame.index) anchors_.push_back(frame.index);
    scene_.segments = update_segments(scene_.segments, anchors_, points_by_frame_, cfg, cfg.seed);
  }

  const std::vector<SeedPoint> seeds = prior ? gather_seeds(frame, estimates, prior, cfg) : all;
  const int seg = segment_for_frame(scene_.segments, frame.index);
  std::vector<bool> inlier(seeds.size(), false);
  if (seg >= 0) {
    const PlaneSegment& s = scene_.segments[seg];
    for (std::size_t i = 0; i < seeds.size(); ++i)
      inlier[i] = std::abs(s.signed_distance(seeds[i].world)) < cfg.plane_distance_threshold;
  }
  add_seeds(scene_, seeds, inlier, std::max(seg, 0));
  spawn_sky(scene_, frame, prior);
}

void Mapper::optimize(int iterations) {
  const SceneConfig& cfg = scene_.config;
  std::vector<int> entries = keyframes_.entries();
  if (entries.empty() && !frames_.empty()) entries.push_back(frames_.back().index);
  if (entries.empty()) return;
  std::vector<Camera> cameras;
  for (int i : entries) cameras.push_back(Camera::of(frame_by_index(i)));
  const bool list_full = static_cast<int>(entries.size()) == cfg.keyframe_count;
  const RenderSettings settings = settings_for(scene_);

  Image d_color, d_depth;
  for (int it = 0; it < iterations; ++it) {
    std::uniform_int_distribution<std::size_t> pick(0, entries.size() - 1);
    const Frame& f = frame_by_index(entries[pick(rng_)]);
    const RenderOutput out = render(scene_, f, settings);
    const LossReport loss = evaluate_loss(scene_, out, f, &d_color, &d_depth);
    backward(scene_, out, d_color, d_depth, grads_);
    loss_iso(scene_, &grads_, cfg.lambda_reg * cfg.lambda_iso);
    adam_.step(scene_, grads_);
    ++iteration_;

    if (list_full && iteration_ % cfg.importance_interval == 0)
      accumulate_importance(importance_, scene_, cameras, grads_, loss.total);
    if (iteration_ % cfg.densify_interval == 0) {
      const DensifyResult r = densify_and_prune(scene_, grads_, rng_);
      adam_.remap(r.remap);
      importance_.remap(r.remap);
    }
    if (progress_) progress_(iteration_, loss.total);
  }
}

FrameRow Mapper::process_frame(const Frame& frame) {
  const auto t0 = std::chrono::steady_clock::now();
  const SceneConfig& cfg = scene_.config;
  if (!frames_.empty() && frame.index <= frames_.back().index)
    throw DomainError("frames must arrive in increasing index order");
  frames_.push_back(frame);

  // (1) coverage of the new view by the current map
  std::optional<RenderOutput> prior;
  if (scene_.size() > 0) prior = render(scene_, frame, settings_for(scene_));

  // (2)-(4) seeding, road classification, sky
  seed(frame, prior ? &*prior : nullptr);

  // (5)-(6) optimization with adaptive control
  advance_keyframes(keyframes_, frame.index);
  grads_.resize_like(scene_);
  adam_.resize_like(scene_);
  optimize(cfg.iterations_per_frame);

  const int frame_count = static_cast<int>(frames_.size());
  if (importance_.samples > 0 && frame_count % cfg.importance_prune_frames == 0) {
    const PruneResult r = importance_prune(scene_, importance_, cfg.prune_rate);
    adam_.remap(r.remap);
    remap_gradients(grads_, r.remap);
  }

  // (7) keyframe refresh
  if (frame.index % cfg.keyframe_interval == 0) {
    std::vector<const Frame*> history;
    for (const Frame& f : frames_)
      if (f.index != frame.index) history.push_back(&f);
    keyframes_ = update_keyframes(keyframes_, frame, history, cfg.keyframe_count, cfg.seed);
  }

  // (8) metrics
  FrameRow row = evaluate_frame(scene_, frame);
  row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return row;
}

RunReport cmd_map(const std::string& dataset_dir, const SceneConfig& cfg, const std::string& out_dir,
                  std::ostream* log) {
  const int n = count_frames(dataset_dir);
  if (n == 0) throw MissingFrame(0);
  Mapper mapper(cfg);
  RunReport report;
  for (int i = 0; i < n; ++i) {
    try {
      report.rows.push_back(mapper.process_frame(read_frame(dataset_dir, i)));
    } catch (const std::exception& e) {
      throw Error("frame " + std::to_string(i) + ": " + e.what());
    }
    if (log) {
      const FrameRow& r = report.rows.back();
      *log << "frame " << r.frame << ": psnr " << std::fixed << std::setprecision(2) << r.psnr << " dB, "
           << r.n_free + r.n_inlier + r.n_sky << " gaussians, " << std::setprecision(0) << r.wall_ms << " ms\n"
           << std::defaultfloat;
    }
  }
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    report.write_csv(out_dir + "/report.csv");
    save_checkpoint(out_dir + "/scene.ckpt", mapper.scene());
  }
  return report;
}

RunReport cmd_eval(const std::string& checkpoint, const std::string& dataset_dir) {
  const HybridScene scene = load_checkpoint(checkpoint);
  const int n = count_frames(dataset_dir);
  if (n == 0) throw MissingFrame(0);
  RunReport report;
  for (int i = 0; i < n; ++i) report.rows.push_back(evaluate_frame(scene, read_frame(dataset_dir, i)));
  return report;
}

std::vector<RenderOutput> cmd_render(const std::string& checkpoint, const Intrinsics& k,
                                     const std::vector<Pose>& poses, const std::string& out_dir) {
  const HybridScene scene = load_checkpoint(checkpoint);
  std::filesystem::create_directories(out_dir);
  std::vector<RenderOutput> outs;
  for (std::size_t i = 0; i < poses.size(); ++i) {
    RenderOutput out = render(scene, Camera{poses[i], k}, settings_for(scene));
    char name[32];
    std::snprintf(name, sizeof(name), "%06zu", i);
    Image rgb = out.color;
    for (double& v : rgb.data()) v = std::clamp(v, 0.0, 1.0);
    write_png(out_dir + "/rgb_" + name + ".png", rgb);
    write_pfm(out_dir + "/depth_" + name + ".pfm", out.depth);
    write_pfm(out_dir + "/silhouette_" + name + ".pfm", out.silhouette);
    outs.push_back(std::move(out));
  }
  return outs;
}

TriangleMesh fuse_mesh(const HybridScene& scene, const Intrinsics& k, const std::vector<Pose>& poses,
                       const MeshOptions& opts) {
  std::vector<Image> depths;
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (const Pose& pose : poses) {
    const RenderOutput out = render(scene, Camera{pose, k}, settings_for(scene));
    Image d = silhouette_filter(out, scene.config.silhouette_filter);
    for (int y = 0; y < d.height(); ++y) {
      for (int x = 0; x < d.width(); ++x) {
        double& z = d.at(x, y);
        // D is accumulated without dividing by S; a surface needs the hit depth.
        if (z > 0.0) z /= out.silhouette.at(x, y);
        if (z > opts.max_depth) z = 0.0;
        if (z <= 0.0) continue;
        const Vec3 p = pose.to_world(k.unproject(x, y, z));
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
      }
    }
    depths.push_back(std::move(d));
  }
  if (!(lo.array() <= hi.array()).all()) throw EmptyVolume("no valid depth to fuse");
  const double pad = 5.0 * opts.voxel_size;
  TsdfVolume volume = TsdfVolume::covering(lo.array() - pad, hi.array() + pad, opts.voxel_size);
  for (std::size_t i = 0; i < poses.size(); ++i) integrate(volume, depths[i], poses[i], k);
  return extract_mesh(volume);
}

TriangleMesh cmd_mesh(const std::string& checkpoint, const std::string& dataset_dir, const std::string& ply_path,
                      const MeshOptions& opts) {
  const HybridScene scene = load_checkpoint(checkpoint);
  const Intrinsics k = read_intrinsics(dataset_dir);
  std::vector<Pose> poses;
  for (int i = 0, n = count_frames(dataset_dir); i < n; ++i) poses.push_back(read_frame(dataset_dir, i).pose);
  const TriangleMesh mesh = fuse_mesh(scene, k, poses, opts);
  write_ply(ply_path, mesh);
  return mesh;
}

}  // namespace streetsplat
