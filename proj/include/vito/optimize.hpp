#pragma once

// Multiview reconstruction: sparse Adam over the voxel grid and the light.

#include <chrono>
#include <functional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "vito/adjoint.hpp"
#include "vito/metrics.hpp"

namespace vito {

enum class InitMode { Cold, Emissive };

/// Multipliers on the scheduled learning rate per parameter group.
struct ParameterScales {
  double sigma_t = 1.0;
  double albedo = 1.0;
  double g = 1.0;
  double light = 1.0;
};

enum class StepMode {
  /// One Adam step after every view's gradient.
  PerView,
  /// One Adam step per iteration with the view-averaged gradient.
  PerIteration,
};

struct RunConfig {
  int iterations = 60;
  int spp = 128;
  /// (start iteration, lr), sorted by start; the first entry starts at 0.
  std::vector<std::pair<int, double>> schedule = {{0, 1e-3}, {10, 2e-4}, {20, 55e-6}};
  bool optimize_light = true;
  int light_stop_iteration = 8;
  InitMode init_mode = InitMode::Cold;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  /// In run_reconstruction the sigma_t scale is divided by the smallest
  /// extent of the medium bounds, so it acts on optical depth per extent.
  ParameterScales lr_scale{30.0, 10.0, 10.0, 100.0};
  StepMode step_mode = StepMode::PerView;
  /// Tracking majorant floor during optimization; <= 0 selects
  /// 4 / (smallest boundary extent).
  double majorant_floor = 0.0;

  void validate() const {
    require(iterations >= 1, "iterations must be >= 1");
    require(spp >= 1, "spp must be >= 1");
    require(!schedule.empty() && schedule.front().first == 0, "schedule must start at iteration 0");
    for (std::size_t i = 0; i < schedule.size(); ++i) {
      require(schedule[i].second >= 0.0 && std::isfinite(schedule[i].second), "schedule lr must be finite and >= 0");
      if (i > 0) require(schedule[i].first > schedule[i - 1].first, "schedule must be sorted by start iteration");
    }
    require(light_stop_iteration >= 0, "light_stop_iteration must be >= 0");
    require(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0 && eps > 0.0, "invalid Adam constants");
    require(lr_scale.sigma_t >= 0.0 && lr_scale.albedo >= 0.0 && lr_scale.g >= 0.0 && lr_scale.light >= 0.0,
            "lr scales must be >= 0");
  }

  /// lr of the schedule entry with the largest start <= iteration.
  double lr_at(int iteration) const {
    double lr = schedule.front().second;
    for (const auto& [start, value] : schedule)
      if (start <= iteration) lr = value;
    return lr;
  }
};

/// Condition presets: "MO" (light fixed), "MO+LO", "MO+LO+INIT".
inline void apply_condition(RunConfig& cfg, const std::string& condition) {
  if (condition == "MO") {
    cfg.optimize_light = false;
    cfg.init_mode = InitMode::Cold;
  } else if (condition == "MO+LO") {
    cfg.optimize_light = true;
    cfg.init_mode = InitMode::Cold;
  } else if (condition == "MO+LO+INIT") {
    cfg.optimize_light = true;
    cfg.init_mode = InitMode::Emissive;
  } else {
    throw Error("unknown condition '" + condition + "' (expected MO, MO+LO or MO+LO+INIT)");
  }
}

/// Schedule presets. "paper": 60 iterations 1e-3 / 2e-4 at 10 / 55e-6 at 20.
/// "init-pf": 15 iterations 75e-5, 1e-5 from 5. "init-dp": 15 iterations
/// 1e-3, 1e-4 from 3.
inline void apply_schedule_preset(RunConfig& cfg, const std::string& preset) {
  if (preset == "paper") {
    cfg.iterations = 60;
    cfg.schedule = {{0, 1e-3}, {10, 2e-4}, {20, 55e-6}};
  } else if (preset == "init-pf") {
    cfg.iterations = 15;
    cfg.schedule = {{0, 75e-5}, {5, 1e-5}};
  } else if (preset == "init-dp") {
    cfg.iterations = 15;
    cfg.schedule = {{0, 1e-3}, {3, 1e-4}};
  } else {
    throw Error("unknown schedule preset '" + preset + "' (expected paper, init-pf or init-dp)");
  }
}

/// Adam moments and per-element step counters for every optimized scalar.
struct OptimizerState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  // Layout: sigma_t (3N), albedo (3N), g (N), light (3).
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::vector<std::uint32_t> step_counts;
  std::size_t voxels = 0;

  OptimizerState() = default;
  OptimizerState(std::size_t voxel_count, double b1, double b2, double e)
      : beta1(b1), beta2(b2), eps(e), first_moment(7 * voxel_count + 3, 0.0),
        second_moment(7 * voxel_count + 3, 0.0), step_counts(7 * voxel_count + 3, 0), voxels(voxel_count) {}

  std::size_t sigma_t_index(int c, std::size_t v) const { return c * voxels + v; }
  std::size_t albedo_index(int c, std::size_t v) const { return 3 * voxels + c * voxels + v; }
  std::size_t g_index(std::size_t v) const { return 6 * voxels + v; }
  std::size_t light_index(int c) const { return 7 * voxels + c; }

  /// One bias-corrected Adam update of element i; returns the step to
  /// subtract from the parameter.
  double step(std::size_t i, double grad, double lr) {
    const std::uint32_t t = ++step_counts[i];
    first_moment[i] = beta1 * first_moment[i] + (1.0 - beta1) * grad;
    second_moment[i] = beta2 * second_moment[i] + (1.0 - beta2) * grad * grad;
    const double m_hat = first_moment[i] / (1.0 - std::pow(beta1, t));
    const double v_hat = second_moment[i] / (1.0 - std::pow(beta2, t));
    return lr * m_hat / (std::sqrt(v_hat) + eps);
  }
};

struct Parameters {
  MediumGrid medium;
  Spectrum light = Spectrum::Ones();
};

/// Sparse Adam: only elements with a nonzero gradient entry advance their
/// moments and counters and move; everything else is left bit-unchanged.
/// The medium is clamped to its admissible ranges afterward.
inline void sparse_adam_step(OptimizerState& state, const GradientSet& grad, Parameters& params, double lr,
                             const ParameterScales& scale = {}, bool update_light = true) {
  require(grad.shape == params.medium.shape() && state.voxels == params.medium.voxel_count(),
          "sparse_adam_step: shape mismatch");
  require(grad.finite(), "sparse_adam_step: NaN or infinite gradient");
  MediumGrid& m = params.medium;
  for (std::uint32_t v : grad.touched) {
    for (int c = 0; c < 3; ++c) {
      if (const double d = grad.sigma_t(c, v); d != 0.0)
        m.sigma_t(c, v) = static_cast<float>(m.sigma_t(c, v) - state.step(state.sigma_t_index(c, v), d, lr * scale.sigma_t));
      if (const double d = grad.albedo(c, v); d != 0.0)
        m.albedo(c, v) = static_cast<float>(m.albedo(c, v) - state.step(state.albedo_index(c, v), d, lr * scale.albedo));
    }
    if (const double d = grad.d_g[v]; d != 0.0)
      m.g(v) = static_cast<float>(m.g(v) - state.step(state.g_index(v), d, lr * scale.g));
  }
  if (update_light)
    for (int c = 0; c < 3; ++c)
      if (grad.d_light[c] != 0.0) params.light[c] -= state.step(state.light_index(c), grad.d_light[c], lr * scale.light);
  clamp_in_place(m);
  params.light = params.light.max(0.0);
}

struct View {
  Camera camera;
  Image reference;
};

struct LossRecord {
  int iteration = 0;
  double lr = 0.0;
  double loss = 0.0;  ///< mean over views
  double psnr = 0.0;  ///< of the mean loss
  double seconds = 0.0;
  Spectrum light = Spectrum::Zero();  ///< after this iteration's updates
};

struct ReconstructionResult {
  Parameters params;
  std::vector<LossRecord> log;
  /// Light after the last iteration in which it was optimized.
  Spectrum light_at_freeze = Spectrum::Zero();
};

inline void write_loss_csv_header(std::ostream& os) { os << "iteration,lr,loss,psnr,seconds,light_r,light_g,light_b\n"; }

inline void write_loss_csv_row(std::ostream& os, const LossRecord& r) {
  os << r.iteration << ',' << r.lr << ',' << r.loss << ',' << r.psnr << ',' << r.seconds << ',' << r.light[0] << ','
     << r.light[1] << ',' << r.light[2] << '\n';
}

/// Called after every iteration with the log entry and current parameters.
using IterationCallback = std::function<void(const LossRecord&, const Parameters&)>;

inline double default_majorant_floor(const Scene& scene) { return 4.0 / scene.boundary.extent().minCoeff(); }

/// Runs the reconstruction starting from scene.medium / scene.light.radiance.
/// Render keys are (cfg.seed, view index, iteration).
inline ReconstructionResult run_reconstruction(const Scene& scene, const std::vector<View>& views,
                                               const RunConfig& cfg, const IterationCallback& on_iteration = {}) {
  cfg.validate();
  require(!views.empty(), "run_reconstruction needs at least one reference view");
  for (const auto& v : views)
    require(v.reference.width == v.camera.width && v.reference.height == v.camera.height,
            "reference image size must match its camera window");

  Scene work = scene;
  work.majorant_floor = cfg.majorant_floor > 0.0 ? cfg.majorant_floor : default_majorant_floor(scene);
  work.validate();

  ReconstructionResult result;
  result.params.medium = scene.medium;
  result.params.light = scene.light.radiance;
  result.light_at_freeze = scene.light.radiance;
  OptimizerState state(scene.medium.voxel_count(), cfg.beta1, cfg.beta2, cfg.eps);
  ParameterScales scales = cfg.lr_scale;
  scales.sigma_t /= scene.medium.shape().bounds.extent().minCoeff();
  const auto start = std::chrono::steady_clock::now();

  for (int it = 0; it < cfg.iterations; ++it) {
    const double lr = cfg.lr_at(it);
    const bool light_active = cfg.optimize_light && it < cfg.light_stop_iteration;
    double loss_sum = 0.0;
    GradientSet summed;
    if (cfg.step_mode == StepMode::PerIteration) summed = GradientSet(scene.medium.shape());

    for (std::size_t vi = 0; vi < views.size(); ++vi) {
      work.medium = result.params.medium;
      work.light.radiance = result.params.light;
      const RenderKey key{cfg.seed, vi, static_cast<std::uint64_t>(it)};
      LossGradient lg = grad_volpath(work, views[vi].camera, views[vi].reference, cfg.spp, key);
      if (!std::isfinite(lg.loss)) throw Error("optimization diverged: non-finite loss at iteration " + std::to_string(it));
      loss_sum += lg.loss;
      if (cfg.step_mode == StepMode::PerView)
        sparse_adam_step(state, lg.gradient, result.params, lr, scales, light_active);
      else
        summed += lg.gradient;
    }
    if (cfg.step_mode == StepMode::PerIteration) {
      summed.scale(1.0 / static_cast<double>(views.size()));
      sparse_adam_step(state, summed, result.params, lr, scales, light_active);
    }
    if (light_active) result.light_at_freeze = result.params.light;

    LossRecord rec;
    rec.iteration = it;
    rec.lr = lr;
    rec.loss = loss_sum / static_cast<double>(views.size());
    rec.psnr = rec.loss > 0.0 ? psnr(rec.loss) : kInfinity;
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    rec.light = result.params.light;
    result.log.push_back(rec);
    if (on_iteration) on_iteration(rec, result.params);
  }
  return result;
}

struct ViewMetrics {
  double mse = 0.0;
  double psnr = 0.0;
  double ssim = 0.0;
};

struct MetricsSummary {
  std::vector<ViewMetrics> views;
  double mean_mse = 0.0;
  double psnr_of_mean_mse = 0.0;
  double mean_psnr = 0.0;
  double mean_ssim = 0.0;
};

/// Per-view MSE / PSNR / SSIM plus both PSNR aggregates (PSNR of the mean
/// MSE and mean of the per-view PSNRs).
inline MetricsSummary evaluate_metrics(const std::vector<Image>& rendered, const std::vector<Image>& references) {
  require(rendered.size() == references.size() && !rendered.empty(), "metrics need matching non-empty image lists");
  MetricsSummary s;
  for (std::size_t i = 0; i < rendered.size(); ++i) {
    ViewMetrics m;
    m.mse = mse_loss(rendered[i], references[i]);
    m.psnr = m.mse > 0.0 ? psnr(m.mse) : kInfinity;
    m.ssim = ssim(rendered[i], references[i]);
    s.views.push_back(m);
    s.mean_mse += m.mse;
    s.mean_psnr += m.psnr;
    s.mean_ssim += m.ssim;
  }
  const double n = static_cast<double>(rendered.size());
  s.mean_mse /= n;
  s.mean_psnr /= n;
  s.mean_ssim /= n;
  s.psnr_of_mean_mse = s.mean_mse > 0.0 ? psnr(s.mean_mse) : kInfinity;
  return s;
}

}  // namespace vito
