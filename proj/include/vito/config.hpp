#pragma once

// Strict JSON run configuration and scene assembly. The schema is documented
// in docs/formats.md; unknown keys are errors at every level.

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "vito/initfit.hpp"
#include "vito/io_colmap.hpp"
#include "vito/io_image.hpp"
#include "vito/io_volume.hpp"
#include "vito/optimize.hpp"
#include "vito/phantom.hpp"

namespace vito {

struct RingSpec {
  int count = 16;
  double radius = 3.0;
  double elevation_deg = 0.0;
  ViewRing ring;
};

struct ColmapSpec {
  std::string cameras;
  std::string images;
  double metric_scale = 0.0;
  CropWindow crop;
  std::vector<int> image_ids;  ///< empty: all images
};

struct LightSpec {
  Spectrum radiance = Spectrum::Ones();
  /// Camera-attached backlight on the optical axis at this distance (m);
  /// <= 0 uses 2 x ring radius for ring cameras.
  double backlight_distance = 0.0;
  bool has_corners = false;
  std::array<Vec3, 4> corners{};
  LightFrame frame = LightFrame::World;
};

struct SceneSpec {
  std::string medium;  ///< VITO1 medium file (optional)
  bool has_grid = false;
  int dims[3] = {0, 0, 0};
  Box grid_bounds;
  std::string emissive;  ///< VITO1 emissive file (optional)
  double boundary_threshold = -1.0;
  std::optional<Box> boundary;
  LightSpec light;
  int max_depth = 64;
  int rr_depth = 8;
  bool jitter = true;
  std::optional<RingSpec> ring;
  std::optional<ColmapSpec> colmap;
  std::string reference_dir;
  std::vector<std::string> reference_files;
};

struct LoadedConfig {
  RunConfig run;
  SceneSpec scene;
  /// Relative paths in the file are resolved against this directory.
  std::filesystem::path base_dir = ".";

  std::string resolve(const std::string& p) const {
    if (p.empty()) return p;
    const std::filesystem::path path(p);
    return path.is_absolute() ? p : (base_dir / path).string();
  }
};

namespace detail {

using Json = nlohmann::json;

inline void check_keys(const Json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw Error("config: " + where + " must be an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!ok.count(it.key())) throw Error("config: unknown key '" + where + "." + it.key() + "'");
}

inline double get_number(const Json& j, const std::string& name) {
  if (!j.is_number()) throw Error("config: " + name + " must be a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw Error("config: " + name + " must be finite");
  return v;
}

inline int get_int(const Json& j, const std::string& name) {
  if (!j.is_number_integer()) throw Error("config: " + name + " must be an integer");
  const auto v = j.get<long long>();
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max())
    throw Error("config: " + name + " out of range");
  return static_cast<int>(v);
}

inline bool get_bool(const Json& j, const std::string& name) {
  if (!j.is_boolean()) throw Error("config: " + name + " must be true or false");
  return j.get<bool>();
}

inline std::string get_string(const Json& j, const std::string& name) {
  if (!j.is_string()) throw Error("config: " + name + " must be a string");
  return j.get<std::string>();
}

inline std::vector<double> get_numbers(const Json& j, const std::string& name, std::size_t n) {
  if (!j.is_array() || j.size() != n) throw Error("config: " + name + " must be an array of " + std::to_string(n) + " numbers");
  std::vector<double> out;
  for (const auto& x : j) out.push_back(get_number(x, name));
  return out;
}

inline Box get_box(const Json& j, const std::string& name) {
  const auto v = get_numbers(j, name, 6);
  Box b{Vec3(v[0], v[1], v[2]), Vec3(v[3], v[4], v[5])};
  if (!b.valid()) throw Error("config: " + name + " must satisfy lo < hi on every axis");
  return b;
}

inline void parse_run(const Json& r, RunConfig& cfg) {
  check_keys(r, "run",
             {"schedule_preset", "condition", "iterations", "spp", "schedule", "optimize_light", "light_stop_iteration",
              "init_mode", "seed", "adam", "lr_scale", "step_mode", "majorant_floor"});
  if (r.contains("schedule_preset")) apply_schedule_preset(cfg, get_string(r["schedule_preset"], "run.schedule_preset"));
  if (r.contains("condition")) apply_condition(cfg, get_string(r["condition"], "run.condition"));
  if (r.contains("iterations")) cfg.iterations = get_int(r["iterations"], "run.iterations");
  if (r.contains("spp")) cfg.spp = get_int(r["spp"], "run.spp");
  if (r.contains("schedule")) {
    const Json& s = r["schedule"];
    if (!s.is_array() || s.empty()) throw Error("config: run.schedule must be a non-empty array of [start, lr] pairs");
    cfg.schedule.clear();
    for (const auto& e : s) {
      if (!e.is_array() || e.size() != 2) throw Error("config: run.schedule entries must be [start, lr] pairs");
      cfg.schedule.emplace_back(get_int(e[0], "run.schedule start"), get_number(e[1], "run.schedule lr"));
    }
  }
  if (r.contains("optimize_light")) cfg.optimize_light = get_bool(r["optimize_light"], "run.optimize_light");
  if (r.contains("light_stop_iteration"))
    cfg.light_stop_iteration = get_int(r["light_stop_iteration"], "run.light_stop_iteration");
  if (r.contains("init_mode")) {
    const std::string m = get_string(r["init_mode"], "run.init_mode");
    if (m == "cold")
      cfg.init_mode = InitMode::Cold;
    else if (m == "emissive")
      cfg.init_mode = InitMode::Emissive;
    else
      throw Error("config: run.init_mode must be 'cold' or 'emissive'");
  }
  if (r.contains("seed")) {
    if (!r["seed"].is_number_unsigned()) throw Error("config: run.seed must be a non-negative integer");
    cfg.seed = r["seed"].get<std::uint64_t>();
  }
  if (r.contains("adam")) {
    const Json& a = r["adam"];
    check_keys(a, "run.adam", {"beta1", "beta2", "eps"});
    if (a.contains("beta1")) cfg.beta1 = get_number(a["beta1"], "run.adam.beta1");
    if (a.contains("beta2")) cfg.beta2 = get_number(a["beta2"], "run.adam.beta2");
    if (a.contains("eps")) cfg.eps = get_number(a["eps"], "run.adam.eps");
  }
  if (r.contains("lr_scale")) {
    const Json& a = r["lr_scale"];
    check_keys(a, "run.lr_scale", {"sigma_t", "albedo", "g", "light"});
    if (a.contains("sigma_t")) cfg.lr_scale.sigma_t = get_number(a["sigma_t"], "run.lr_scale.sigma_t");
    if (a.contains("albedo")) cfg.lr_scale.albedo = get_number(a["albedo"], "run.lr_scale.albedo");
    if (a.contains("g")) cfg.lr_scale.g = get_number(a["g"], "run.lr_scale.g");
    if (a.contains("light")) cfg.lr_scale.light = get_number(a["light"], "run.lr_scale.light");
  }
  if (r.contains("step_mode")) {
    const std::string m = get_string(r["step_mode"], "run.step_mode");
    if (m == "per-view")
      cfg.step_mode = StepMode::PerView;
    else if (m == "per-iteration")
      cfg.step_mode = StepMode::PerIteration;
    else
      throw Error("config: run.step_mode must be 'per-view' or 'per-iteration'");
  }
  if (r.contains("majorant_floor")) cfg.majorant_floor = get_number(r["majorant_floor"], "run.majorant_floor");
}

inline void parse_light(const Json& l, LightSpec& spec) {
  check_keys(l, "scene.light", {"radiance", "backlight_distance", "corners", "frame"});
  if (l.contains("radiance")) {
    const auto v = get_numbers(l["radiance"], "scene.light.radiance", 3);
    spec.radiance = Spectrum(v[0], v[1], v[2]);
    if ((spec.radiance < 0.0).any()) throw Error("config: scene.light.radiance must be >= 0");
  }
  if (l.contains("backlight_distance"))
    spec.backlight_distance = get_number(l["backlight_distance"], "scene.light.backlight_distance");
  if (l.contains("corners")) {
    const Json& c = l["corners"];
    if (!c.is_array() || c.size() != 4) throw Error("config: scene.light.corners must hold 4 points");
    for (int i = 0; i < 4; ++i) {
      const auto v = get_numbers(c[i], "scene.light.corners", 3);
      spec.corners[i] = Vec3(v[0], v[1], v[2]);
    }
    spec.has_corners = true;
  }
  if (l.contains("frame")) {
    const std::string f = get_string(l["frame"], "scene.light.frame");
    if (f == "world")
      spec.frame = LightFrame::World;
    else if (f == "camera")
      spec.frame = LightFrame::Camera;
    else
      throw Error("config: scene.light.frame must be 'world' or 'camera'");
  }
  if (spec.has_corners && spec.backlight_distance > 0.0)
    throw Error("config: scene.light takes either corners or backlight_distance, not both");
}

inline void parse_scene(const Json& s, SceneSpec& spec) {
  check_keys(s, "scene",
             {"medium", "grid", "emissive", "boundary_threshold", "boundary", "light", "max_depth", "rr_depth", "jitter"});
  if (s.contains("medium")) spec.medium = get_string(s["medium"], "scene.medium");
  if (s.contains("grid")) {
    const Json& g = s["grid"];
    check_keys(g, "scene.grid", {"dims", "bounds"});
    if (!g.contains("dims") || !g.contains("bounds")) throw Error("config: scene.grid needs dims and bounds");
    const Json& d = g["dims"];
    if (!d.is_array() || d.size() != 3) throw Error("config: scene.grid.dims must be [X, Y, Z]");
    for (int a = 0; a < 3; ++a) {
      spec.dims[a] = get_int(d[a], "scene.grid.dims");
      if (spec.dims[a] <= 0) throw Error("config: scene.grid.dims must be positive");
    }
    spec.grid_bounds = get_box(g["bounds"], "scene.grid.bounds");
    spec.has_grid = true;
  }
  if (s.contains("emissive")) spec.emissive = get_string(s["emissive"], "scene.emissive");
  if (s.contains("boundary_threshold")) {
    spec.boundary_threshold = get_number(s["boundary_threshold"], "scene.boundary_threshold");
    if (spec.boundary_threshold < 0.0) throw Error("config: scene.boundary_threshold must be >= 0");
  }
  if (s.contains("boundary")) spec.boundary = get_box(s["boundary"], "scene.boundary");
  if (s.contains("light")) parse_light(s["light"], spec.light);
  if (s.contains("max_depth")) spec.max_depth = get_int(s["max_depth"], "scene.max_depth");
  if (s.contains("rr_depth")) spec.rr_depth = get_int(s["rr_depth"], "scene.rr_depth");
  if (s.contains("jitter")) spec.jitter = get_bool(s["jitter"], "scene.jitter");
}

inline void parse_cameras(const Json& c, SceneSpec& spec) {
  check_keys(c, "cameras", {"ring", "colmap"});
  if (c.contains("ring") == c.contains("colmap")) throw Error("config: cameras needs exactly one of ring or colmap");
  if (c.contains("ring")) {
    const Json& r = c["ring"];
    check_keys(r, "cameras.ring", {"count", "radius", "elevation_deg", "width", "height", "fov_deg", "azimuth_offset_deg"});
    RingSpec ring;
    if (r.contains("count")) ring.count = get_int(r["count"], "cameras.ring.count");
    if (r.contains("radius")) ring.radius = get_number(r["radius"], "cameras.ring.radius");
    if (r.contains("elevation_deg")) ring.elevation_deg = get_number(r["elevation_deg"], "cameras.ring.elevation_deg");
    if (r.contains("width")) ring.ring.width = get_int(r["width"], "cameras.ring.width");
    if (r.contains("height")) ring.ring.height = get_int(r["height"], "cameras.ring.height");
    if (r.contains("fov_deg")) ring.ring.vertical_fov_deg = get_number(r["fov_deg"], "cameras.ring.fov_deg");
    if (r.contains("azimuth_offset_deg"))
      ring.ring.azimuth_offset_deg = get_number(r["azimuth_offset_deg"], "cameras.ring.azimuth_offset_deg");
    if (ring.count < 1 || ring.radius <= 0.0 || ring.ring.width <= 0 || ring.ring.height <= 0 ||
        !(ring.ring.vertical_fov_deg > 0.0 && ring.ring.vertical_fov_deg < 180.0))
      throw Error("config: cameras.ring needs count >= 1, radius > 0, positive size and fov in (0, 180)");
    spec.ring = ring;
  } else {
    const Json& r = c["colmap"];
    check_keys(r, "cameras.colmap", {"cameras", "images", "metric_scale", "crop", "image_ids"});
    ColmapSpec cm;
    if (!r.contains("cameras") || !r.contains("images") || !r.contains("metric_scale"))
      throw Error("config: cameras.colmap needs cameras, images and metric_scale");
    cm.cameras = get_string(r["cameras"], "cameras.colmap.cameras");
    cm.images = get_string(r["images"], "cameras.colmap.images");
    cm.metric_scale = get_number(r["metric_scale"], "cameras.colmap.metric_scale");
    if (!(cm.metric_scale > 0.0)) throw Error("config: cameras.colmap.metric_scale must be > 0");
    if (r.contains("crop")) {
      const Json& cr = r["crop"];
      if (!cr.is_array() || cr.size() != 4) throw Error("config: cameras.colmap.crop must be [x, y, width, height]");
      cm.crop = {get_int(cr[0], "crop"), get_int(cr[1], "crop"), get_int(cr[2], "crop"), get_int(cr[3], "crop")};
    }
    if (r.contains("image_ids")) {
      if (!r["image_ids"].is_array()) throw Error("config: cameras.colmap.image_ids must be an array");
      for (const auto& id : r["image_ids"]) cm.image_ids.push_back(get_int(id, "cameras.colmap.image_ids"));
    }
    spec.colmap = cm;
  }
}

}  // namespace detail

/// Parses a configuration document. An empty document (or "{}") yields the
/// default RunConfig (60 iterations, 128 spp, 1e-3 / 2e-4 at 10 / 55e-6 at
/// 20, light stop 8).
inline LoadedConfig load_run_config(const std::string& text, const std::filesystem::path& base_dir = ".") {
  LoadedConfig out;
  out.base_dir = base_dir;
  const bool blank = text.find_first_not_of(" \t\r\n") == std::string::npos;
  if (blank) return out;
  detail::Json j;
  try {
    j = detail::Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(std::string("config: ") + e.what());
  }
  detail::check_keys(j, "<root>", {"run", "scene", "cameras", "references"});
  if (j.contains("run")) detail::parse_run(j["run"], out.run);
  if (j.contains("scene")) detail::parse_scene(j["scene"], out.scene);
  if (j.contains("cameras")) detail::parse_cameras(j["cameras"], out.scene);
  if (j.contains("references")) {
    const auto& r = j["references"];
    detail::check_keys(r, "references", {"dir", "files"});
    if (r.contains("dir")) out.scene.reference_dir = detail::get_string(r["dir"], "references.dir");
    if (r.contains("files")) {
      if (!r["files"].is_array()) throw Error("config: references.files must be an array of paths");
      for (const auto& f : r["files"]) out.scene.reference_files.push_back(detail::get_string(f, "references.files"));
    }
  }
  out.run.validate();
  return out;
}

inline LoadedConfig load_run_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return load_run_config(ss.str(), std::filesystem::path(path).parent_path());
  } catch (const Error& e) {
    throw Error(path + ": " + e.what());
  }
}

/// File name of ring view i in a reference or render directory.
inline std::string view_file_name(std::size_t i, const std::string& ext = ".png") {
  char buf[32];
  std::snprintf(buf, sizeof buf, "view_%03zu", i);
  return buf + ext;
}

struct Setup {
  Scene scene;
  /// Per-camera base names (ring: view_XXX; colmap: image name without extension).
  std::vector<std::string> view_names;
  /// Per-camera reference image paths (empty when the config names none).
  std::vector<std::string> reference_paths;
};

/// Builds the scene described by a configuration. The medium comes from
/// scene.medium, else a uniformly initialized scene.grid.
inline Setup assemble_scene(const LoadedConfig& cfg) {
  const SceneSpec& s = cfg.scene;
  Setup out;
  Scene& scene = out.scene;
  if (!s.medium.empty())
    scene.medium = read_medium(cfg.resolve(s.medium));
  else if (s.has_grid)
    scene.medium = MediumGrid(s.dims[0], s.dims[1], s.dims[2], s.grid_bounds);
  else
    throw Error("config: scene needs a medium file or a grid");
  scene.boundary = s.boundary.value_or(scene.medium.shape().bounds);
  scene.max_depth = s.max_depth;
  scene.rr_depth = s.rr_depth;
  scene.jitter = s.jitter;
  scene.seed = cfg.run.seed;

  if (s.ring) {
    scene.cameras = make_views(scene, s.ring->count, s.ring->radius, s.ring->elevation_deg, s.ring->ring);
    for (int i = 0; i < s.ring->count; ++i) out.view_names.push_back(view_file_name(i, ""));
  } else if (s.colmap) {
    std::ifstream ci(cfg.resolve(s.colmap->cameras));
    if (!ci) throw Error("cannot open " + cfg.resolve(s.colmap->cameras));
    std::ifstream ii(cfg.resolve(s.colmap->images));
    if (!ii) throw Error("cannot open " + cfg.resolve(s.colmap->images));
    const auto intr = parse_colmap_cameras(ci);
    const auto poses = parse_colmap_images(ii);
    for (const auto& pose : poses) {
      if (!s.colmap->image_ids.empty() &&
          std::find(s.colmap->image_ids.begin(), s.colmap->image_ids.end(), pose.id) == s.colmap->image_ids.end())
        continue;
      const auto it = std::find_if(intr.begin(), intr.end(), [&](const ColmapCamera& c) { return c.id == pose.camera_id; });
      if (it == intr.end()) throw Error("images.txt: image " + pose.name + " refers to unknown camera " + std::to_string(pose.camera_id));
      scene.cameras.push_back(assemble_camera(*it, pose, s.colmap->metric_scale, s.colmap->crop));
      out.view_names.push_back(std::filesystem::path(pose.name).stem().string());
    }
    if (scene.cameras.empty()) throw Error("config: no COLMAP image selected");
  } else {
    throw Error("config: cameras section missing");
  }

  const LightSpec& l = s.light;
  if (l.has_corners) {
    scene.light.corners = l.corners;
    scene.light.frame = l.frame;
    scene.light.radiance = l.radiance;
  } else {
    double distance = l.backlight_distance;
    if (distance <= 0.0) {
      if (!s.ring) throw Error("config: scene.light needs corners or backlight_distance for COLMAP cameras");
      distance = 2.0 * s.ring->radius;
    }
    scene.light = make_backlight(0.5 * distance, scene.cameras.front(), l.radiance);
  }

  if (!s.reference_files.empty()) {
    if (s.reference_files.size() != scene.cameras.size())
      throw Error("config: references.files has " + std::to_string(s.reference_files.size()) + " entries for " +
                  std::to_string(scene.cameras.size()) + " cameras");
    for (const auto& f : s.reference_files) out.reference_paths.push_back(cfg.resolve(f));
  } else if (!s.reference_dir.empty()) {
    const std::filesystem::path dir = cfg.resolve(s.reference_dir);
    for (const auto& name : out.view_names) out.reference_paths.push_back((dir / (name + ".png")).string());
  }
  scene.validate();
  return out;
}

/// Loads every reference image, checking sizes against the cameras.
inline std::vector<View> load_views(const Setup& setup) {
  require(!setup.reference_paths.empty(), "config: no reference images (set references.dir or references.files)");
  std::vector<View> views;
  for (std::size_t i = 0; i < setup.scene.cameras.size(); ++i) {
    Image img = read_image(setup.reference_paths[i]);
    const Camera& cam = setup.scene.cameras[i];
    require(img.width == cam.width && img.height == cam.height,
            setup.reference_paths[i] + ": image is " + std::to_string(img.width) + "x" + std::to_string(img.height) +
                ", camera window is " + std::to_string(cam.width) + "x" + std::to_string(cam.height));
    views.push_back({cam, std::move(img)});
  }
  return views;
}

/// Emissive initialization: the light estimate from the references feeds
/// the inverse-emittance mapping and becomes the initial light radiance. With
/// a boundary threshold the emissive grid is first cropped to the extracted
/// boundary box.
inline void initialize_from_emissive(Setup& setup, const LoadedConfig& cfg, const std::vector<View>& views) {
  require(!cfg.scene.emissive.empty(), "config: emissive initialization needs scene.emissive");
  EmissiveGrid em = read_emissive(cfg.resolve(cfg.scene.emissive));
  if (cfg.scene.boundary_threshold >= 0.0) em = crop(em, extract_boundary(em, cfg.scene.boundary_threshold));
  std::vector<Image> refs;
  for (const auto& v : views) refs.push_back(v.reference);
  const Spectrum light = light_bootstrap(refs);
  setup.scene.medium = inverse_emittance(em, light);
  setup.scene.light.radiance = light;
  if (!setup.scene.boundary.contains(setup.scene.medium.shape().bounds)) setup.scene.boundary = setup.scene.medium.shape().bounds;
  setup.scene.validate();
}

}  // namespace vito
