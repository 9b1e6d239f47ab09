#include "streetsplat/checkpoint.hpp"
#include "streetsplat/config.hpp"
#include "streetsplat/errors.hpp"
#include "streetsplat/ingest.hpp"
#include "streetsplat/pipeline.hpp"
#include "streetsplat/synth.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

using namespace streetsplat;

namespace {

SceneConfig load_config(const std::string& path, const std::optional<std::uint64_t>& seed) {
  SceneConfig cfg = path.empty() ? SceneConfig{} : read_config_file(path);
  if (seed) cfg.seed = *seed;
  return cfg;
}

std::vector<Pose> read_pose_list(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open pose list " + path);
  std::vector<Pose> poses;
  Mat4 m;
  while (true) {
    for (int i = 0; i < 16; ++i)
      if (!(in >> m(i / 4, i % 4))) {
        if (i == 0 && in.eof()) return poses;
        throw FormatError("pose list must hold whole 4x4 matrices");
      }
    poses.push_back(Pose::from_matrix(m));
  }
}

double column(const FrameRow& r, const std::string& name) {
  if (name == "psnr") return r.psnr;
  if (name == "ssim") return r.ssim;
  if (name == "mae") return r.depth_mae;
  if (name == "rmse") return r.depth_rmse;
  throw DomainError("unknown metric '" + name + "'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Online dense mapping of street scenes with hybrid Gaussians"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out;

  auto* synth = app.add_subcommand("synth", "Generate a procedural street dataset");
  SynthOptions so;
  bool no_objects = false;
  synth->add_option("--out", out, "Dataset directory")->required();
  synth->add_option("--seed", so.seed, "Scene seed");
  synth->add_option("--frames", so.n_frames, "Number of frames")->check(CLI::Range(2, 100000));
  synth->add_option("--width", so.width, "Image width")->check(CLI::PositiveNumber);
  synth->add_option("--height", so.height, "Image height")->check(CLI::PositiveNumber);
  synth->add_option("--ramp-deg", so.ramp_deg, "Road pitch past the ramp start, degrees");
  synth->add_flag("--flat", no_objects, "Road and sky only");

  auto* map = app.add_subcommand("map", "Map a dataset and write report.csv and scene.ckpt");
  std::string dataset;
  int iterations = -1;
  bool quiet = false;
  map->add_option("dataset", dataset, "Dataset directory")->required();
  map->add_option("--out", out, "Output directory")->required();
  map->add_option("--config", config_path, "Config file (key = value)");
  map->add_option("--seed", seed, "RNG seed");
  map->add_option("--iterations", iterations, "Override iterations per frame");
  map->add_flag("--quiet", quiet, "No per-frame log");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint against a dataset");
  std::string checkpoint;
  std::string metrics = "psnr,ssim,mae,rmse";
  eval->add_option("checkpoint", checkpoint, "Checkpoint file")->required();
  eval->add_option("dataset", dataset, "Dataset directory")->required();
  eval->add_option("--metrics", metrics, "Comma-separated subset of psnr,ssim,mae,rmse");
  eval->add_option("--out", out, "Write the full report as CSV");

  auto* rend = app.add_subcommand("render", "Render a checkpoint to PNG/PFM");
  std::string poses_path;
  rend->add_option("checkpoint", checkpoint, "Checkpoint file")->required();
  rend->add_option("dataset", dataset, "Dataset providing intrinsics (and poses)")->required();
  rend->add_option("--poses", poses_path, "Text file of 4x4 camera->world matrices");
  rend->add_option("--out", out, "Output directory")->required();

  auto* mesh = app.add_subcommand("mesh", "Fuse rendered depth into a PLY mesh");
  MeshOptions mo;
  mesh->add_option("checkpoint", checkpoint, "Checkpoint file")->required();
  mesh->add_option("dataset", dataset, "Dataset providing poses and intrinsics")->required();
  mesh->add_option("--out", out, "PLY path")->required();
  mesh->add_option("--voxel", mo.voxel_size, "Voxel size, m")->check(CLI::PositiveNumber);
  mesh->add_option("--max-depth", mo.max_depth, "Ignore rendered depth beyond this, m")->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) {
      so.with_objects = !no_objects;
      const SynthDataset data = synth_scene(so);
      write_dataset(out, data);
      std::cout << "wrote " << data.frames.size() << " frames to " << out << "\n";
    } else if (*map) {
      SceneConfig cfg = load_config(config_path, seed);
      if (iterations >= 0) cfg.iterations_per_frame = iterations;
      const RunReport report = cmd_map(dataset, cfg, out, quiet ? nullptr : &std::cerr);
      std::cout << report.summary();
    } else if (*eval) {
      const RunReport report = cmd_eval(checkpoint, dataset);
      std::vector<std::string> cols;
      std::stringstream ss(metrics);
      for (std::string c; std::getline(ss, c, ',');)
        if (!c.empty()) cols.push_back(c);
      std::cout << "frame";
      for (const auto& c : cols) std::cout << std::setw(10) << c;
      std::cout << "\n" << std::fixed << std::setprecision(4);
      std::vector<double> mean(cols.size(), 0.0);
      for (const FrameRow& r : report.rows) {
        std::cout << std::setw(5) << r.frame;
        for (std::size_t i = 0; i < cols.size(); ++i) {
          const double v = column(r, cols[i]);
          mean[i] += v / static_cast<double>(report.rows.size());
          std::cout << std::setw(10) << v;
        }
        std::cout << "\n";
      }
      std::cout << " mean";
      for (double m : mean) std::cout << std::setw(10) << m;
      std::cout << "\n";
      if (!out.empty()) report.write_csv(out);
    } else if (*rend) {
      const Intrinsics k = read_intrinsics(dataset);
      std::vector<Pose> poses;
      if (!poses_path.empty()) {
        poses = read_pose_list(poses_path);
      } else {
        for (int i = 0, n = count_frames(dataset); i < n; ++i) poses.push_back(read_frame(dataset, i).pose);
      }
      cmd_render(checkpoint, k, poses, out);
      std::cout << "rendered " << poses.size() << " views to " << out << "\n";
    } else if (*mesh) {
      const TriangleMesh m = cmd_mesh(checkpoint, dataset, out, mo);
      std::cout << "wrote " << m.vertices.size() << " vertices, " << m.faces.size() << " faces to " << out << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
