#include "streetsplat/config.hpp"

#include "streetsplat/errors.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace streetsplat {
namespace {

struct Field {
  std::function<void(SceneConfig&, const std::string&)> set;
  std::function<std::string(const SceneConfig&)> get;
};

template <typename T>
Field make_field(T SceneConfig::*member) {
  Field f;
  f.set = [member](SceneConfig& c, const std::string& text) {
    std::istringstream is(text);
    if constexpr (std::is_same_v<T, bool>) {
      std::string word;
      is >> word;
      if (word == "true" || word == "1") {
        c.*member = true;
      } else if (word == "false" || word == "0") {
        c.*member = false;
      } else {
        throw FormatError("expected boolean, got '" + text + "'");
      }
      return;
    } else {
      T value{};
      is >> value;
      std::string rest;
      if (is.fail() || (is >> rest)) {
        throw FormatError("malformed value '" + text + "'");
      }
      c.*member = value;
    }
  };
  f.get = [member](const SceneConfig& c) {
    std::ostringstream os;
    os.precision(17);
    if constexpr (std::is_same_v<T, bool>) {
      os << (c.*member ? "true" : "false");
    } else {
      os << c.*member;
    }
    return os.str();
  };
  return f;
}

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = {
      {"sky_radius", make_field(&SceneConfig::sky_radius)},
      {"sky_thickness", make_field(&SceneConfig::sky_thickness)},
      {"plane_thickness", make_field(&SceneConfig::plane_thickness)},
      {"plane_distance_threshold", make_field(&SceneConfig::plane_distance_threshold)},
      {"ransac_iterations", make_field(&SceneConfig::ransac_iterations)},
      {"alpha_threshold", make_field(&SceneConfig::alpha_threshold)},
      {"scale_threshold", make_field(&SceneConfig::scale_threshold)},
      {"grad_threshold", make_field(&SceneConfig::grad_threshold)},
      {"scene_extent", make_field(&SceneConfig::scene_extent)},
      {"split_fraction", make_field(&SceneConfig::split_fraction)},
      {"densify_interval", make_field(&SceneConfig::densify_interval)},
      {"lambda_dssim", make_field(&SceneConfig::lambda_dssim)},
      {"lambda_rgb", make_field(&SceneConfig::lambda_rgb)},
      {"lambda_lidar", make_field(&SceneConfig::lambda_lidar)},
      {"lambda_smooth", make_field(&SceneConfig::lambda_smooth)},
      {"lambda_iso", make_field(&SceneConfig::lambda_iso)},
      {"lambda_reg", make_field(&SceneConfig::lambda_reg)},
      {"lr_position", make_field(&SceneConfig::lr_position)},
      {"lr_color", make_field(&SceneConfig::lr_color)},
      {"lr_opacity", make_field(&SceneConfig::lr_opacity)},
      {"lr_scale", make_field(&SceneConfig::lr_scale)},
      {"lr_rotation", make_field(&SceneConfig::lr_rotation)},
      {"keyframe_count", make_field(&SceneConfig::keyframe_count)},
      {"keyframe_interval", make_field(&SceneConfig::keyframe_interval)},
      {"iterations_per_frame", make_field(&SceneConfig::iterations_per_frame)},
      {"importance_interval", make_field(&SceneConfig::importance_interval)},
      {"importance_prune_frames", make_field(&SceneConfig::importance_prune_frames)},
      {"prune_rate", make_field(&SceneConfig::prune_rate)},
      {"silhouette_seed", make_field(&SceneConfig::silhouette_seed)},
      {"silhouette_filter", make_field(&SceneConfig::silhouette_filter)},
      {"mde_factor", make_field(&SceneConfig::mde_factor)},
      {"flow_threshold", make_field(&SceneConfig::flow_threshold)},
      {"min_ray_angle_deg", make_field(&SceneConfig::min_ray_angle_deg)},
      {"default_depth_constant", make_field(&SceneConfig::default_depth_constant)},
      {"seed_radius_px", make_field(&SceneConfig::seed_radius_px)},
      {"sky_cell_px", make_field(&SceneConfig::sky_cell_px)},
      {"sort_inliers", make_field(&SceneConfig::sort_inliers)},
      {"seed", make_field(&SceneConfig::seed)},
  };
  return table;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

void validate(const SceneConfig& c) {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw DomainError(what);
  };
  require(c.sky_radius > 0 && c.sky_thickness > 0, "sky radius/thickness must be positive");
  require(c.plane_thickness > 0, "plane_thickness must be positive");
  require(c.plane_distance_threshold > 0, "plane_distance_threshold must be positive");
  require(c.ransac_iterations > 0, "ransac_iterations must be positive");
  require(c.alpha_threshold > 0 && c.alpha_threshold < 1, "alpha_threshold must be in (0,1)");
  require(c.scale_threshold > 0, "scale_threshold must be positive");
  require(c.grad_threshold > 0, "grad_threshold must be positive");
  require(c.scene_extent > 0 && c.split_fraction > 0, "scene_extent/split_fraction must be positive");
  require(c.densify_interval > 0, "densify_interval must be positive");
  require(c.lambda_dssim >= 0 && c.lambda_dssim <= 1, "lambda_dssim must be in [0,1]");
  require(c.lambda_rgb >= 0 && c.lambda_lidar >= 0 && c.lambda_smooth >= 0 &&
              c.lambda_iso >= 0 && c.lambda_reg >= 0,
          "loss weights must be nonnegative");
  require(c.keyframe_count >= 2, "keyframe_count must be at least 2");
  require(c.keyframe_interval > 0, "keyframe_interval must be positive");
  require(c.iterations_per_frame >= 0, "iterations_per_frame must be nonnegative");
  require(c.importance_interval > 0 && c.importance_prune_frames > 0,
          "importance schedule must be positive");
  require(c.prune_rate >= 0 && c.prune_rate < 100, "prune_rate must be in [0,100)");
  require(c.silhouette_seed > 0 && c.silhouette_filter > 0, "silhouette thresholds must be positive");
  require(c.mde_factor > 0, "mde_factor must be positive");
  require(c.flow_threshold > 0, "flow_threshold must be positive");
  require(c.min_ray_angle_deg > 0 && c.min_ray_angle_deg < 90, "min_ray_angle_deg must be in (0,90)");
  require(c.default_depth_constant > 0, "default_depth_constant must be positive");
  require(c.seed_radius_px > 0 && c.sky_cell_px > 0, "seed radius / sky cell must be positive");
}

SceneConfig read_config(std::istream& in) {
  SceneConfig cfg;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw FormatError("line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = fields().find(key);
    if (it == fields().end()) {
      throw FormatError("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
    try {
      it->second.set(cfg, value);
    } catch (const FormatError& e) {
      throw FormatError("line " + std::to_string(line_no) + " (" + key + "): " + e.what());
    }
  }
  try {
    validate(cfg);
  } catch (const DomainError& e) {
    throw FormatError(e.what());
  }
  return cfg;
}

SceneConfig read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open config '" + path + "'");
  return read_config(in);
}

void write_config(std::ostream& out, const SceneConfig& cfg) {
  for (const auto& [key, field] : fields()) {
    out << key << " = " << field.get(cfg) << '\n';
  }
}

}  // namespace streetsplat
