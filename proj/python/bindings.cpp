#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "streetsplat/checkpoint.hpp"
#include "streetsplat/config.hpp"
#include "streetsplat/errors.hpp"
#include "streetsplat/init.hpp"
#include "streetsplat/metrics.hpp"
#include "streetsplat/pipeline.hpp"
#include "streetsplat/plane.hpp"
#include "streetsplat/synth.hpp"

#include <sstream>

namespace py = pybind11;
using namespace streetsplat;

namespace {

py::array_t<double> to_numpy(const Image& im) {
  std::vector<py::ssize_t> shape{im.height(), im.width()};
  if (im.channels() > 1) shape.push_back(im.channels());
  py::array_t<double> a(shape);
  std::copy(im.data().begin(), im.data().end(), a.mutable_data());
  return a;
}

Image from_numpy(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 2 && a.ndim() != 3) throw DimensionMismatch("expected an H x W or H x W x C array");
  const int h = static_cast<int>(a.shape(0)), w = static_cast<int>(a.shape(1));
  const int c = a.ndim() == 3 ? static_cast<int>(a.shape(2)) : 1;
  Image im(w, h, c);
  std::copy(a.data(), a.data() + a.size(), im.data().begin());
  return im;
}

py::dict row_dict(const FrameRow& r) {
  py::dict d;
  d["frame"] = r.frame;
  d["psnr"] = r.psnr;
  d["ssim"] = r.ssim;
  d["depth_mae"] = r.depth_mae;
  d["depth_rmse"] = r.depth_rmse;
  d["n_free"] = r.n_free;
  d["n_inlier"] = r.n_inlier;
  d["n_sky"] = r.n_sky;
  d["wall_ms"] = r.wall_ms;
  d["cmp_grouped"] = r.cmp_grouped;
  d["cmp_unified"] = r.cmp_unified;
  return d;
}

py::list report_rows(const RunReport& r) {
  py::list out;
  for (const auto& row : r.rows) out.append(row_dict(row));
  return out;
}

}  // namespace

PYBIND11_MODULE(_streetsplat, m) {
  m.doc() = "Online hybrid-Gaussian street mapping";

  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<DimensionMismatch>(m, "DimensionMismatch", m.attr("Error").ptr());
  py::register_exception<FormatError>(m, "FormatError", m.attr("Error").ptr());
  py::register_exception<DegenerateCloud>(m, "DegenerateCloud", m.attr("Error").ptr());
  py::register_exception<EmptyVolume>(m, "EmptyVolume", m.attr("Error").ptr());
  py::register_exception<MissingFrame>(m, "MissingFrame", m.attr("Error").ptr());

  py::class_<SceneConfig>(m, "SceneConfig")
      .def(py::init<>())
      .def_readwrite("iterations_per_frame", &SceneConfig::iterations_per_frame)
      .def_readwrite("keyframe_count", &SceneConfig::keyframe_count)
      .def_readwrite("keyframe_interval", &SceneConfig::keyframe_interval)
      .def_readwrite("prune_rate", &SceneConfig::prune_rate)
      .def_readwrite("sky_radius", &SceneConfig::sky_radius)
      .def_readwrite("lambda_dssim", &SceneConfig::lambda_dssim)
      .def_readwrite("seed", &SceneConfig::seed)
      .def("to_text", [](const SceneConfig& c) {
        std::ostringstream s;
        write_config(s, c);
        return s.str();
      })
      .def_static("from_text", [](const std::string& text) {
        std::istringstream s(text);
        return read_config(s);
      });

  m.def(
      "synth",
      [](const std::string& out_dir, std::uint64_t seed, int frames, int width, int height) {
        SynthOptions o;
        o.seed = seed;
        o.n_frames = frames;
        o.width = width;
        o.height = height;
        write_dataset(out_dir, synth_scene(o));
      },
      py::arg("out_dir"), py::arg("seed") = 7, py::arg("frames") = 10, py::arg("width") = 128,
      py::arg("height") = 128, "Writes a procedural street dataset.");

  m.def(
      "map_dataset",
      [](const std::string& dataset, const SceneConfig& cfg, const std::string& out_dir) {
        RunReport r;
        {
          py::gil_scoped_release release;
          r = cmd_map(dataset, cfg, out_dir);
        }
        return report_rows(r);
      },
      py::arg("dataset"), py::arg("config") = SceneConfig{}, py::arg("out_dir") = "",
      "Maps every frame; returns one dict per frame.");

  m.def(
      "evaluate",
      [](const std::string& ckpt, const std::string& dataset) { return report_rows(cmd_eval(ckpt, dataset)); },
      py::arg("checkpoint"), py::arg("dataset"));

  m.def(
      "render_frame",
      [](const std::string& ckpt, const std::string& dataset, int index) {
        const HybridScene scene = load_checkpoint(ckpt);
        const Frame f = read_frame(dataset, index);
        const auto out = render(scene, f, settings_for(scene));
        return py::make_tuple(to_numpy(out.color), to_numpy(out.depth), to_numpy(out.silhouette));
      },
      py::arg("checkpoint"), py::arg("dataset"), py::arg("index"),
      "Returns (color, depth, silhouette) rendered at a dataset frame.");

  m.def(
      "scene_counts",
      [](const std::string& ckpt) {
        const HybridScene s = load_checkpoint(ckpt);
        py::dict d;
        d["free"] = s.free.size();
        d["inlier"] = s.inlier.size();
        d["sky"] = s.sky.size();
        d["segments"] = s.segments.size();
        return d;
      },
      py::arg("checkpoint"));

  m.def(
      "fit_plane",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& pts, double threshold,
         int iterations, std::uint64_t seed) {
        if (pts.ndim() != 2 || pts.shape(1) != 3) throw DimensionMismatch("expected an N x 3 array");
        PointCloud cloud;
        for (py::ssize_t i = 0; i < pts.shape(0); ++i) cloud.emplace_back(pts.at(i, 0), pts.at(i, 1), pts.at(i, 2));
        const auto fit = fit_plane_ransac(cloud, threshold, iterations, seed);
        const Vec4& c = fit.segment.coefficients;
        return py::make_tuple(std::vector<double>{c[0], c[1], c[2], c[3]}, fit.inliers);
      },
      py::arg("points"), py::arg("threshold") = 0.15, py::arg("iterations") = 200, py::arg("seed") = 0,
      "RANSAC road plane: returns ([A, B, C, D], inlier flags).");

  m.def(
      "psnr", [](const py::array_t<double>& a, const py::array_t<double>& b) { return psnr(from_numpy(a), from_numpy(b)); },
      py::arg("pred"), py::arg("target"));
  m.def(
      "ssim", [](const py::array_t<double>& a, const py::array_t<double>& b) { return ssim_metric(from_numpy(a), from_numpy(b)); },
      py::arg("pred"), py::arg("target"));

  m.def(
      "mesh",
      [](const std::string& ckpt, const std::string& dataset, const std::string& ply, double voxel) {
        MeshOptions o;
        o.voxel_size = voxel;
        const auto mesh = cmd_mesh(ckpt, dataset, ply, o);
        return py::make_tuple(mesh.vertices.size(), mesh.faces.size());
      },
      py::arg("checkpoint"), py::arg("dataset"), py::arg("ply"), py::arg("voxel") = 0.1,
      "Fuses renders into a mesh; returns (vertex count, face count).");
}
