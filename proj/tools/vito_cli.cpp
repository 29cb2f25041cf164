// vito: command line front end for rendering, reconstruction and re-rendering.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "vito/vito.hpp"

namespace fs = std::filesystem;
using namespace vito;

namespace {

struct Common {
  std::string config;
  int threads = 0;
  std::optional<int> spp;
  std::optional<std::uint64_t> seed;
  std::string medium;
  std::vector<double> light;
  std::string views;
  std::string format = "png";
};

void add_common(CLI::App* cmd, Common& c, bool need_out_dir, std::string& out) {
  cmd->add_option("config", c.config, "Run configuration (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--threads", c.threads, "Worker threads (default: VITO_THREADS or all cores)")->check(CLI::PositiveNumber);
  cmd->add_option("--spp", c.spp, "Samples per pixel")->check(CLI::PositiveNumber);
  cmd->add_option("--seed", c.seed, "Random seed");
  cmd->add_option("--medium", c.medium, "Medium volume overriding the config");
  cmd->add_option("--light", c.light, "Light radiance r g b overriding the config")->expected(3);
  if (need_out_dir) {
    cmd->add_option("--out", out, "Output directory")->required();
    cmd->add_option("--views", c.views, "Comma separated view indices (default: all)");
    cmd->add_option("--format", c.format, "Image format")->check(CLI::IsMember({"png", "pfm"}));
  }
}

struct Loaded {
  LoadedConfig cfg;
  Setup setup;
};

Loaded load(const Common& c) {
  if (c.threads > 0) set_worker_count(c.threads);
  Loaded l;
  l.cfg = load_run_config_file(c.config);
  if (c.spp) l.cfg.run.spp = *c.spp;
  if (c.seed) l.cfg.run.seed = *c.seed;
  if (!c.medium.empty()) l.cfg.scene.medium = fs::absolute(c.medium).string();
  l.cfg.run.validate();
  l.setup = assemble_scene(l.cfg);
  if (!c.light.empty()) l.setup.scene.light.radiance = Spectrum(c.light[0], c.light[1], c.light[2]);
  l.setup.scene.validate();
  return l;
}

std::vector<std::size_t> select_views(const std::string& spec, std::size_t count) {
  std::vector<std::size_t> out;
  if (spec.empty()) {
    for (std::size_t i = 0; i < count; ++i) out.push_back(i);
    return out;
  }
  std::stringstream ss(spec);
  for (std::string tok; std::getline(ss, tok, ',');) {
    std::size_t used = 0;
    long v = -1;
    try {
      v = std::stol(tok, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != tok.size() || v < 0 || static_cast<std::size_t>(v) >= count)
      throw Error("--views: '" + tok + "' is not a view index in [0, " + std::to_string(count) + ")");
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

/// Renders the selected views of `scene` with keys (seed, view, 0).
void render_views(const Scene& scene, const Setup& setup, int spp, std::uint64_t seed, const Common& c,
                  const std::string& out_dir) {
  fs::create_directories(out_dir);
  for (std::size_t v : select_views(c.views, scene.cameras.size())) {
    const Image img = present(render_volpath(scene, scene.cameras[v], spp, RenderKey{seed, v, 0}), scene.output);
    const fs::path path = fs::path(out_dir) / (setup.view_names[v] + "." + c.format);
    if (c.format == "pfm")
      write_pfm(path.string(), img);
    else
      write_png(path.string(), img);
    std::cout << "wrote " << path.string() << '\n';
  }
}

/// Copy of the config file with the medium and light replaced, so later
/// stages can render the reconstruction directly.
void write_result_config(const std::string& source, const std::string& dest, const std::string& medium_path,
                         const Spectrum& light) {
  std::ifstream in(source);
  nlohmann::json j = nlohmann::json::parse(in, nullptr, true, true);
  if (!j.is_object()) j = nlohmann::json::object();
  auto& scene = j["scene"];
  scene.erase("grid");
  scene.erase("emissive");
  scene.erase("boundary_threshold");
  scene["medium"] = fs::absolute(medium_path).string();
  scene["light"]["radiance"] = {light[0], light[1], light[2]};
  if (j.contains("references")) {
    auto& refs = j["references"];
    const fs::path base = fs::absolute(source).parent_path();
    if (refs.contains("dir")) refs["dir"] = (base / refs["dir"].get<std::string>()).lexically_normal().string();
    if (refs.contains("files"))
      for (auto& f : refs["files"]) f = (base / f.get<std::string>()).lexically_normal().string();
  }
  auto& cams = j["cameras"];
  if (cams.contains("colmap")) {
    const fs::path base = fs::absolute(source).parent_path();
    for (const char* key : {"cameras", "images"})
      cams["colmap"][key] = (base / cams["colmap"][key].get<std::string>()).lexically_normal().string();
  }
  std::ofstream out(dest);
  if (!out) throw Error("cannot write " + dest);
  out << j.dump(2) << '\n';
}

std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::vector<std::string> image_list(const std::string& path) {
  if (!fs::is_directory(path)) return {path};
  std::vector<std::string> out;
  for (const auto& e : fs::directory_iterator(path)) {
    const std::string ext = e.path().extension().string();
    if (e.is_regular_file() && (ext == ".png" || ext == ".pfm")) out.push_back(e.path().string());
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) throw Error(path + ": no .png or .pfm images");
  return out;
}

ClipPlane parse_plane(const std::vector<double>& v) {
  const Vec3 n(v[0], v[1], v[2]);
  require(n.norm() > 0.0 && std::isfinite(n.norm()), "--plane normal must be nonzero");
  return ClipPlane{n.normalized(), v[3] / n.norm()};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vito: differentiable volume rendering and reconstruction"};
  app.require_subcommand(1);

  // render
  Common render_opts;
  std::string render_out;
  auto* render = app.add_subcommand("render", "Render every camera of a configuration");
  add_common(render, render_opts, true, render_out);

  // reconstruct
  Common recon_opts;
  std::string recon_out, condition, dump_dir, config_out, preset;
  std::optional<int> iterations;
  auto* recon = app.add_subcommand("reconstruct", "Fit the medium (and light) to the reference images");
  add_common(recon, recon_opts, false, recon_out);
  recon->add_option("--out", recon_out, "Output directory (medium.vito, loss.csv)")->required();
  recon->add_option("--condition", condition, "Experiment condition")->check(CLI::IsMember({"MO", "MO+LO", "MO+LO+INIT"}));
  recon->add_option("--schedule", preset, "Schedule preset")->check(CLI::IsMember({"paper", "init-pf", "init-dp"}));
  recon->add_option("--iterations", iterations, "Iteration count")->check(CLI::PositiveNumber);
  recon->add_option("--dump-iters", dump_dir, "Write a render of view 0 after every iteration to this directory");
  recon->add_option("--config-out", config_out, "Write a config that renders the result");

  // init-from-emissive
  Common init_opts;
  std::string init_out;
  auto* init = app.add_subcommand("init-from-emissive", "Convert the emissive grid into an initial medium");
  add_common(init, init_opts, false, init_out);
  init->add_option("--out", init_out, "Output medium volume")->required();

  // relight
  Common relight_opts;
  std::string relight_out, mode = "darkfield";
  auto* relight = app.add_subcommand("relight", "Re-render under a different illumination");
  add_common(relight, relight_opts, true, relight_out);
  relight->add_option("--mode", mode, "Illumination")->check(CLI::IsMember({"brightfield", "darkfield", "inverse-darkfield"}));

  // slice
  Common slice_opts;
  std::string slice_out;
  std::vector<double> plane;
  auto* slice = app.add_subcommand("slice", "Re-render with the medium clipped by a plane");
  add_common(slice, slice_opts, true, slice_out);
  slice->add_option("--plane", plane, "nx ny nz offset: removes the side where n.x > offset")->expected(4)->required();

  // immerse
  Common immerse_opts;
  std::string immerse_out, water_table, water_type;
  std::vector<double> tank;
  auto* immerse = app.add_subcommand("immerse", "Re-render inside a homogeneous water medium");
  add_common(immerse, immerse_opts, true, immerse_out);
  immerse->add_option("--water", water_table, "Water type table")->required()->check(CLI::ExistingFile);
  immerse->add_option("--water-type", water_type, "Row name in the water table")->required();
  immerse->add_option("--tank", tank, "Tank box lo_x lo_y lo_z hi_x hi_y hi_z (default: scene boundary)")->expected(6);

  // metrics
  std::string metrics_a, metrics_b;
  auto* metrics = app.add_subcommand("metrics", "MSE / PSNR / SSIM between images or image directories");
  metrics->add_option("rendered", metrics_a, "Image or directory")->required()->check(CLI::ExistingPath);
  metrics->add_option("reference", metrics_b, "Image or directory")->required()->check(CLI::ExistingPath);

  // phantom-gen
  std::string kind, phantom_out;
  std::vector<int> dims;
  std::vector<double> bounds = {-0.5, -0.5, -0.5, 0.5, 0.5, 0.5};
  auto* phantom = app.add_subcommand("phantom-gen", "Write a synthetic ground-truth medium");
  phantom->add_option("--kind", kind, "Phantom kind")
      ->required()
      ->check(CLI::IsMember({"nested-spheres", "checker-slab", "point-absorber"}));
  phantom->add_option("--dims", dims, "Grid size: n or nx ny nz")->required()->expected(1, 3);
  phantom->add_option("--bounds", bounds, "lo_x lo_y lo_z hi_x hi_y hi_z")->expected(6);
  phantom->add_option("--out", phantom_out, "Output volume")->required();
  std::string emissive_out;
  std::vector<double> emissive_light = {1.0, 1.0, 1.0};
  phantom->add_option("--emissive-out", emissive_out, "Also write the emissive twin of the phantom");
  phantom->add_option("--emissive-light", emissive_light, "Light r g b the emissive twin inverts under")->expected(3);

  CLI11_PARSE(app, argc, argv);

  try {
    if (render->parsed()) {
      const Loaded l = load(render_opts);
      render_views(l.setup.scene, l.setup, l.cfg.run.spp, l.cfg.run.seed, render_opts, render_out);

    } else if (recon->parsed()) {
      if (recon_opts.threads > 0) set_worker_count(recon_opts.threads);
      LoadedConfig cfg = load_run_config_file(recon_opts.config);
      if (!preset.empty()) apply_schedule_preset(cfg.run, preset);
      if (!condition.empty()) apply_condition(cfg.run, condition);
      if (iterations) cfg.run.iterations = *iterations;
      if (recon_opts.spp) cfg.run.spp = *recon_opts.spp;
      if (recon_opts.seed) cfg.run.seed = *recon_opts.seed;
      if (!recon_opts.medium.empty()) cfg.scene.medium = fs::absolute(recon_opts.medium).string();
      cfg.run.validate();
      Setup setup = assemble_scene(cfg);
      if (!recon_opts.light.empty())
        setup.scene.light.radiance = Spectrum(recon_opts.light[0], recon_opts.light[1], recon_opts.light[2]);
      const std::vector<View> views = load_views(setup);
      if (cfg.run.init_mode == InitMode::Emissive) initialize_from_emissive(setup, cfg, views);

      fs::create_directories(recon_out);
      if (!dump_dir.empty()) fs::create_directories(dump_dir);
      std::ofstream csv(fs::path(recon_out) / "loss.csv");
      write_loss_csv_header(csv);
      const auto on_iteration = [&](const LossRecord& r, const Parameters& p) {
        std::printf("iter %d lr %.6g loss %.6g psnr %.4f elapsed %.2fs light %.9g %.9g %.9g\n", r.iteration, r.lr, r.loss,
                    r.psnr, r.seconds, r.light[0], r.light[1], r.light[2]);
        std::fflush(stdout);
        write_loss_csv_row(csv, r);
        csv.flush();
        if (!dump_dir.empty()) {
          Scene s = setup.scene;
          s.medium = p.medium;
          s.light.radiance = p.light;
          const Image img = render_volpath(s, s.cameras[0], cfg.run.spp, RenderKey{cfg.run.seed, 0, 1u << 20});
          char name[32];
          std::snprintf(name, sizeof name, "iter_%03d.png", r.iteration);
          write_png((fs::path(dump_dir) / name).string(), img);
        }
      };
      const ReconstructionResult res = run_reconstruction(setup.scene, views, cfg.run, on_iteration);
      const std::string medium_path = (fs::path(recon_out) / "medium.vito").string();
      write_volume(medium_path, res.params.medium);
      std::printf("wrote %s\nlight %.9g %.9g %.9g\n", medium_path.c_str(), res.params.light[0], res.params.light[1],
                  res.params.light[2]);
      if (!config_out.empty()) {
        write_result_config(recon_opts.config, config_out, medium_path, res.params.light);
        std::printf("wrote %s\n", config_out.c_str());
      }

    } else if (init->parsed()) {
      if (init_opts.threads > 0) set_worker_count(init_opts.threads);
      const LoadedConfig cfg = load_run_config_file(init_opts.config);
      Setup setup = assemble_scene(cfg);
      initialize_from_emissive(setup, cfg, load_views(setup));
      write_volume(init_out, setup.scene.medium);
      const Spectrum& l = setup.scene.light.radiance;
      std::printf("wrote %s\nlight %.9g %.9g %.9g\n", init_out.c_str(), l[0], l[1], l[2]);

    } else if (relight->parsed()) {
      const Loaded l = load(relight_opts);
      const Scene s = mode == "brightfield" ? scenario_brightfield(l.setup.scene)
                      : mode == "darkfield" ? scenario_darkfield(l.setup.scene)
                                            : scenario_inverse_darkfield(l.setup.scene);
      render_views(s, l.setup, l.cfg.run.spp, l.cfg.run.seed, relight_opts, relight_out);

    } else if (slice->parsed()) {
      const Loaded l = load(slice_opts);
      const Scene s = scenario_slice(l.setup.scene, parse_plane(plane));
      render_views(s, l.setup, l.cfg.run.spp, l.cfg.run.seed, slice_opts, slice_out);

    } else if (immerse->parsed()) {
      const Loaded l = load(immerse_opts);
      std::ifstream in(water_table);
      const WaterType w = find_water_type(parse_water_table(in), water_type);
      std::optional<Box> tank_box;
      if (!tank.empty()) tank_box = Box{Vec3(tank[0], tank[1], tank[2]), Vec3(tank[3], tank[4], tank[5])};
      const Scene s = scenario_immerse(l.setup.scene, w.medium(), tank_box);
      render_views(s, l.setup, l.cfg.run.spp, l.cfg.run.seed, immerse_opts, immerse_out);

    } else if (metrics->parsed()) {
      const auto a = image_list(metrics_a);
      const auto b = image_list(metrics_b);
      if (a.size() != b.size())
        throw Error("metrics: " + std::to_string(a.size()) + " rendered images vs " + std::to_string(b.size()) + " references");
      std::vector<Image> ra, rb;
      for (std::size_t i = 0; i < a.size(); ++i) {
        ra.push_back(read_image(a[i]));
        rb.push_back(read_image(b[i]));
        if (ra.back().width != rb.back().width || ra.back().height != rb.back().height)
          throw Error("metrics: size mismatch between " + a[i] + " and " + b[i]);
      }
      const MetricsSummary m = evaluate_metrics(ra, rb);
      std::cout << "view,mse,psnr,ssim\n";
      for (std::size_t i = 0; i < a.size(); ++i)
        std::cout << fs::path(a[i]).filename().string() << ',' << format_double(m.views[i].mse) << ','
                  << format_double(m.views[i].psnr) << ',' << format_double(m.views[i].ssim) << '\n';
      std::cout << "mean," << format_double(m.mean_mse) << ',' << format_double(m.mean_psnr) << ','
                << format_double(m.mean_ssim) << '\n';
      std::cout << "pooled," << format_double(m.mean_mse) << ',' << format_double(m.psnr_of_mean_mse) << ','
                << format_double(m.mean_ssim) << '\n';

    } else if (phantom->parsed()) {
      const int nx = dims[0], ny = dims.size() == 3 ? dims[1] : dims[0], nz = dims.size() == 3 ? dims[2] : dims[0];
      if (dims.size() == 2) throw Error("--dims takes 1 or 3 values");
      const Box box{Vec3(bounds[0], bounds[1], bounds[2]), Vec3(bounds[3], bounds[4], bounds[5])};
      require(box.valid(), "--bounds must satisfy lo < hi on every axis");
      const MediumGrid m = make_phantom(kind, nx, ny, nz, box);
      write_volume(phantom_out, m);
      std::printf("wrote %s\n", phantom_out.c_str());
      if (!emissive_out.empty()) {
        write_volume(emissive_out, emissive_twin(m, Spectrum(emissive_light[0], emissive_light[1], emissive_light[2])));
        std::printf("wrote %s\n", emissive_out.c_str());
      }
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
