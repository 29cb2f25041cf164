#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "test_support.hpp"

using namespace vito;

namespace {

Image uniform_display(int w, int h, double code) { return Image(w, h, srgb_decode(code / 255.0)); }

GradientSet dense_gradient(const GridShape& shape, std::mt19937_64& rng) {
  std::normal_distribution<double> n01;
  GradientSet g(shape);
  for (double& x : g.d_sigma_t) x = n01(rng);
  for (double& x : g.d_albedo) x = n01(rng);
  for (double& x : g.d_g) x = n01(rng);
  for (int c = 0; c < 3; ++c) g.d_light[c] = n01(rng);
  g.rebuild_touched();
  return g;
}

struct Fixture {
  Scene scene;
  std::vector<View> views;
};

/// Small phantom with references rendered from the truth at high spp.
Fixture small_problem(const Spectrum& init_light) {
  Fixture f;
  const MediumGrid truth = make_phantom(PhantomKind::NestedSpheres, 4, 4, 4, test::unit_box());
  Scene truth_scene;
  truth_scene.medium = truth;
  truth_scene.boundary = truth.shape().bounds;
  const auto cams = make_views(truth_scene, 2, 3.0, 10.0, ViewRing{8, 8, 30.0, 0.0});
  for (std::size_t i = 0; i < cams.size(); ++i) {
    Scene s = truth_scene;
    s.light = make_backlight(3.0, cams[i], Spectrum::Ones());
    f.views.push_back({cams[i], render_volpath(s, cams[i], 64, RenderKey{77, i, 0})});
  }
  f.scene = truth_scene;
  f.scene.medium = MediumGrid(4, 4, 4, test::unit_box());
  f.scene.light = make_backlight(3.0, cams[0], init_light);
  return f;
}

}  // namespace

TEST(Metrics, MseExamples) {
  const Image a = uniform_display(4, 4, 100.0);
  EXPECT_EQ(mse_loss(a, a), 0.0);
  EXPECT_NEAR(mse_loss(a, uniform_display(4, 4, 110.0)), 100.0, 1e-9);
  Image b = a;
  for (std::size_t p = 0; p < b.pixel_count(); ++p) b.pixels[3 * p + 1] = srgb_decode(103.0 / 255.0);
  EXPECT_NEAR(mse_loss(a, b), 3.0, 1e-9);
  EXPECT_THROW(mse_loss(a, Image(4, 5)), Error);
}

TEST(Metrics, PsnrExamples) {
  EXPECT_NEAR(psnr(65025.0), 0.0, 1e-12);
  EXPECT_NEAR(psnr(650.25), 20.0, 1e-12);
  EXPECT_NEAR(psnr(6.5025), 40.0, 1e-12);
  EXPECT_THROW(psnr(0.0), Error);
  EXPECT_THROW(psnr(-1.0), Error);
}

TEST(Metrics, SsimExamples) {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Image img(24, 20);
  for (double& x : img.pixels) x = u(rng);
  EXPECT_NEAR(ssim(img, img), 1.0, 1e-12);
  const double closed = (2.0 * 100 * 110 + 6.5025) / (100.0 * 100 + 110.0 * 110 + 6.5025);
  EXPECT_NEAR(closed, 0.995477, 1e-6);
  EXPECT_NEAR(ssim(uniform_display(16, 16, 100.0), uniform_display(16, 16, 110.0)), closed, 1e-9);
  Image neg = img;
  for (std::size_t i = 0; i < img.pixels.size(); ++i) neg.pixels[i] = srgb_decode(1.0 - srgb_encode(img.pixels[i]));
  EXPECT_LT(ssim(img, neg), 0.0);
  EXPECT_THROW(ssim(img, Image(24, 21)), Error);
}

TEST(Metrics, LossAdjointMatchesFiniteDifference) {
  const Spectrum r(0.2, 0.5, 0.9), ref(0.3, 0.1, 0.95);
  const Spectrum adj = mse_loss_adjoint(r, ref, 3);
  for (int c = 0; c < 3; ++c) {
    const double h = 1e-7;
    const auto loss = [&](double x) {
      const double d = display_value(x) - display_value(ref[c]);
      return d * d / 3.0;
    };
    EXPECT_NEAR(adj[c], (loss(r[c] + h) - loss(r[c] - h)) / (2 * h), 1e-4 * std::abs(adj[c]));
  }
}

TEST(Metrics, BothPsnrAggregates) {
  const std::vector<Image> refs = {uniform_display(12, 12, 100.0), uniform_display(12, 12, 100.0)};
  const std::vector<Image> outs = {uniform_display(12, 12, 110.0), uniform_display(12, 12, 101.0)};
  const MetricsSummary s = evaluate_metrics(outs, refs);
  EXPECT_NEAR(s.mean_mse, 50.5, 1e-9);
  EXPECT_NEAR(s.psnr_of_mean_mse, psnr(50.5), 1e-9);
  EXPECT_NEAR(s.mean_psnr, 0.5 * (psnr(100.0) + psnr(1.0)), 1e-9);
  EXPECT_GT(s.mean_psnr, s.psnr_of_mean_mse);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  Parameters p{MediumGrid(4, 4, 4, test::unit_box()), Spectrum::Ones()};
  p.medium.sigma_t(0, 5) = 1.0f;
  OptimizerState state(p.medium.voxel_count(), 0.9, 0.999, 1e-8);
  GradientSet g(p.medium.shape());
  g.sigma_t(0, 5) = 1.0;
  g.rebuild_touched();
  sparse_adam_step(state, g, p, 1e-3);
  EXPECT_NEAR(1.0 - p.medium.sigma_t(0, 5), 9.99999e-4, 1e-7);
  EXPECT_NEAR(state.step(state.sigma_t_index(1, 0), 1.0, 1e-3), 1e-3 / (1.0 + 1e-8), 1e-15);
}

TEST(Adam, UntouchedEntriesAreBitUnchanged) {
  std::mt19937_64 rng(42);
  Parameters p{make_phantom(PhantomKind::NestedSpheres, 6, 6, 6, test::unit_box()), Spectrum(0.9, 1.0, 1.1)};
  OptimizerState state(p.medium.voxel_count(), 0.9, 0.999, 1e-8);
  // Warm up every moment so "unchanged" is not trivially zero.
  sparse_adam_step(state, dense_gradient(p.medium.shape(), rng), p, 1e-3);
  const Parameters before = p;
  const OptimizerState state_before = state;

  GradientSet g(p.medium.shape());
  g.sigma_t(1, 17) = 0.5;
  g.d_g[40] = -2.0;
  g.rebuild_touched();
  sparse_adam_step(state, g, p, 1e-3, {}, false);
  for (std::size_t i = 0; i < state.first_moment.size(); ++i) {
    const bool moved = i == state.sigma_t_index(1, 17) || i == state.g_index(40);
    EXPECT_EQ(state.step_counts[i], state_before.step_counts[i] + (moved ? 1u : 0u)) << i;
    if (!moved) {
      EXPECT_EQ(state.first_moment[i], state_before.first_moment[i]);
      EXPECT_EQ(state.second_moment[i], state_before.second_moment[i]);
    }
  }
  for (std::size_t i = 0; i < p.medium.sigma_t().size(); ++i)
    if (i != static_cast<std::size_t>(state.sigma_t_index(1, 17))) EXPECT_EQ(p.medium.sigma_t()[i], before.medium.sigma_t()[i]);
  EXPECT_TRUE(p.medium.albedo().size() == before.medium.albedo().size() &&
              std::equal(p.medium.albedo().begin(), p.medium.albedo().end(), before.medium.albedo().begin()));
  EXPECT_NE(p.medium.sigma_t(1, 17), before.medium.sigma_t(1, 17));
  EXPECT_NE(p.medium.g(40), before.medium.g(40));
  EXPECT_TRUE((p.light == before.light).all());
}

TEST(Adam, ZeroGradientChangesNothing) {
  Parameters p{make_phantom(PhantomKind::CheckerSlab, 4, 4, 4, test::unit_box()), Spectrum::Ones()};
  const Parameters before = p;
  OptimizerState state(p.medium.voxel_count(), 0.9, 0.999, 1e-8);
  sparse_adam_step(state, GradientSet(p.medium.shape()), p, 1e-2);
  EXPECT_TRUE(p.medium == before.medium);
  EXPECT_TRUE((p.light == before.light).all());
  for (auto n : state.step_counts) EXPECT_EQ(n, 0u);
}

TEST(Adam, DenseGradientMatchesTextbookAdam) {
  std::mt19937_64 rng(43);
  const GridShape shape{3, 3, 3, test::unit_box()};
  Parameters p{MediumGrid(3, 3, 3, test::unit_box()), Spectrum::Constant(5.0)};
  for (float& x : p.medium.sigma_t()) x = 10.0f;
  OptimizerState state(27, 0.9, 0.999, 1e-8);
  // Textbook dense Adam on one sigma_t element, in double.
  const std::size_t probe = state.sigma_t_index(2, 13);
  double theta = 10.0, m = 0.0, v = 0.0;
  for (int t = 1; t <= 25; ++t) {
    const GradientSet g = dense_gradient(shape, rng);
    const double d = g.d_sigma_t[probe];
    m = 0.9 * m + 0.1 * d;
    v = 0.999 * v + 0.001 * d * d;
    const double step = 1e-3 * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
    theta -= step;
    const double before = p.medium.sigma_t()[probe];
    const double update = state.step(probe, d, 1e-3);
    EXPECT_NEAR(update, step, 1e-12);
    p.medium.sigma_t()[probe] = static_cast<float>(before - update);
  }
  EXPECT_NEAR(p.medium.sigma_t()[probe], theta, 1e-5);
  EXPECT_EQ(state.step_counts[probe], 25u);
}

TEST(Adam, DenseSparseStepMatchesElementwiseAdam) {
  std::mt19937_64 rng(44);
  Parameters p{MediumGrid(3, 3, 3, test::unit_box()), Spectrum::Constant(5.0)};
  for (float& x : p.medium.sigma_t()) x = 10.0f;
  std::vector<double> theta(81, 10.0), m(81, 0.0), v(81, 0.0);
  OptimizerState state(27, 0.9, 0.999, 1e-8);
  for (int t = 1; t <= 10; ++t) {
    const GradientSet g = dense_gradient(p.medium.shape(), rng);
    sparse_adam_step(state, g, p, 1e-3);
    for (std::size_t i = 0; i < 81; ++i) {
      const double d = g.d_sigma_t[i];
      m[i] = 0.9 * m[i] + 0.1 * d;
      v[i] = 0.999 * v[i] + 0.001 * d * d;
      theta[i] -= 1e-3 * (m[i] / (1 - std::pow(0.9, t))) / (std::sqrt(v[i] / (1 - std::pow(0.999, t))) + 1e-8);
      EXPECT_NEAR(state.first_moment[i], m[i], 1e-12);
      EXPECT_NEAR(state.second_moment[i], v[i], 1e-12);
    }
  }
  // Parameters are stored in float.
  for (std::size_t i = 0; i < 81; ++i) EXPECT_NEAR(p.medium.sigma_t()[i], theta[i], 1e-5);
}

TEST(Adam, NaNGradientIsAnError) {
  Parameters p{MediumGrid(4, 4, 4, test::unit_box()), Spectrum::Ones()};
  OptimizerState state(p.medium.voxel_count(), 0.9, 0.999, 1e-8);
  GradientSet g(p.medium.shape());
  g.albedo(0, 3) = std::nan("");
  g.rebuild_touched();
  EXPECT_THROW(sparse_adam_step(state, g, p, 1e-3), Error);
}

TEST(Adam, ClampsAfterStep) {
  Parameters p{MediumGrid(4, 4, 4, test::unit_box()), Spectrum::Constant(0.0005)};
  OptimizerState state(p.medium.voxel_count(), 0.9, 0.999, 1e-8);
  GradientSet g(p.medium.shape());
  g.sigma_t(0, 0) = 1.0;  // sigma_t 0 would step negative
  g.d_light = Spectrum::Ones();
  g.rebuild_touched();
  sparse_adam_step(state, g, p, 1e-3);
  EXPECT_EQ(p.medium.sigma_t(0, 0), 0.0f);
  EXPECT_EQ(p.light[0], 0.0);
}

TEST(Schedule, LearningRateLookup) {
  RunConfig cfg;
  EXPECT_EQ(cfg.lr_at(0), 1e-3);
  EXPECT_EQ(cfg.lr_at(9), 1e-3);
  EXPECT_EQ(cfg.lr_at(10), 2e-4);
  EXPECT_EQ(cfg.lr_at(19), 2e-4);
  EXPECT_EQ(cfg.lr_at(20), 55e-6);
  EXPECT_EQ(cfg.lr_at(59), 55e-6);
  apply_schedule_preset(cfg, "init-pf");
  EXPECT_EQ(cfg.iterations, 15);
  EXPECT_EQ(cfg.lr_at(4), 75e-5);
  EXPECT_EQ(cfg.lr_at(5), 1e-5);
  apply_schedule_preset(cfg, "init-dp");
  EXPECT_EQ(cfg.lr_at(3), 1e-4);
  EXPECT_THROW(apply_schedule_preset(cfg, "fast"), Error);
}

TEST(Schedule, ValidationRejectsBadConfigs) {
  RunConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.schedule = {{0, 1e-3}, {10, 2e-4}, {5, 1e-4}};
  EXPECT_THROW(cfg.validate(), Error);
  cfg = RunConfig{};
  cfg.schedule = {{2, 1e-3}};
  EXPECT_THROW(cfg.validate(), Error);
  cfg = RunConfig{};
  cfg.iterations = 0;
  EXPECT_THROW(cfg.validate(), Error);
}

TEST(Schedule, Conditions) {
  RunConfig cfg;
  apply_condition(cfg, "MO");
  EXPECT_FALSE(cfg.optimize_light);
  apply_condition(cfg, "MO+LO");
  EXPECT_TRUE(cfg.optimize_light);
  EXPECT_EQ(cfg.init_mode, InitMode::Cold);
  apply_condition(cfg, "MO+LO+INIT");
  EXPECT_EQ(cfg.init_mode, InitMode::Emissive);
  EXPECT_THROW(apply_condition(cfg, "LO"), Error);
}

TEST(Reconstruction, ZeroLearningRateKeepsInitialization) {
  Fixture f = small_problem(Spectrum::Ones());
  f.scene.medium = make_phantom(PhantomKind::CheckerSlab, 4, 4, 4, test::unit_box());
  RunConfig cfg;
  cfg.iterations = 1;
  cfg.spp = 4;
  cfg.schedule = {{0, 0.0}};
  const ReconstructionResult r = run_reconstruction(f.scene, f.views, cfg);
  EXPECT_TRUE(r.params.medium == f.scene.medium);
  EXPECT_TRUE((r.params.light == f.scene.light.radiance).all());
  ASSERT_EQ(r.log.size(), 1u);
  EXPECT_GT(r.log[0].loss, 0.0);
}

TEST(Reconstruction, LogFollowsScheduleAndLightFreezes) {
  Fixture f = small_problem(Spectrum::Constant(0.5));
  RunConfig cfg;
  cfg.iterations = 6;
  cfg.spp = 4;
  cfg.light_stop_iteration = 3;
  cfg.schedule = {{0, 0.02}, {2, 0.01}, {4, 0.005}};
  std::vector<int> seen;
  const ReconstructionResult r =
      run_reconstruction(f.scene, f.views, cfg, [&](const LossRecord& rec, const Parameters&) { seen.push_back(rec.iteration); });
  ASSERT_EQ(r.log.size(), 6u);
  EXPECT_EQ(seen, (std::vector<int>{0, 1, 2, 3, 4, 5}));
  for (const auto& rec : r.log) EXPECT_EQ(rec.lr, cfg.lr_at(rec.iteration));
  EXPECT_FALSE((r.log[2].light == Spectrum::Constant(0.5)).all());
  for (int it = 2; it < 6; ++it) EXPECT_TRUE((r.log[it].light == r.light_at_freeze).all());
  EXPECT_FALSE((r.log[1].light == r.light_at_freeze).all());
  EXPECT_TRUE((r.params.light == r.light_at_freeze).all());
}

TEST(Reconstruction, LightFixedWithoutLightOptimization) {
  Fixture f = small_problem(Spectrum::Constant(0.5));
  RunConfig cfg;
  apply_condition(cfg, "MO");
  cfg.iterations = 3;
  cfg.spp = 4;
  const ReconstructionResult r = run_reconstruction(f.scene, f.views, cfg);
  for (const auto& rec : r.log) EXPECT_TRUE((rec.light == Spectrum::Constant(0.5)).all());
}

TEST(Reconstruction, DeterministicWithFixedSeed) {
  Fixture f = small_problem(Spectrum::Constant(0.8));
  RunConfig cfg;
  cfg.iterations = 3;
  cfg.spp = 4;
  cfg.seed = 5;
  const ReconstructionResult a = run_reconstruction(f.scene, f.views, cfg);
  const ReconstructionResult b = run_reconstruction(f.scene, f.views, cfg);
  EXPECT_TRUE(a.params.medium == b.params.medium);
  for (std::size_t i = 0; i < a.log.size(); ++i) EXPECT_EQ(a.log[i].loss, b.log[i].loss);
}

TEST(Reconstruction, LossDecreasesOnSmallPhantom) {
  Fixture f = small_problem(Spectrum::Ones());
  RunConfig cfg;
  cfg.iterations = 12;
  cfg.spp = 16;
  cfg.schedule = {{0, 0.05}, {8, 0.02}};
  cfg.lr_scale = ParameterScales{};
  const ReconstructionResult r = run_reconstruction(f.scene, f.views, cfg);
  EXPECT_LT(r.log.back().loss, 0.5 * r.log.front().loss);
}

TEST(Reconstruction, DefaultScalesAndScheduleDecreaseLoss) {
  Fixture f = small_problem(Spectrum::Ones());
  RunConfig cfg;
  cfg.iterations = 12;
  cfg.spp = 16;
  const ReconstructionResult r = run_reconstruction(f.scene, f.views, cfg);
  EXPECT_LT(r.log.back().loss, 0.5 * r.log.front().loss);
}

TEST(Reconstruction, RejectsMismatchedReference) {
  Fixture f = small_problem(Spectrum::Ones());
  f.views[1].reference = Image(9, 8);
  EXPECT_THROW(run_reconstruction(f.scene, f.views, RunConfig{}), Error);
  EXPECT_THROW(run_reconstruction(f.scene, {}, RunConfig{}), Error);
}

TEST(Reconstruction, LossCsv) {
  std::ostringstream os;
  write_loss_csv_header(os);
  write_loss_csv_row(os, LossRecord{3, 0.5, 12.0, 37.3, 1.25, Spectrum(1, 2, 3)});
  EXPECT_EQ(os.str(), "iteration,lr,loss,psnr,seconds,light_r,light_g,light_b\n3,0.5,12,37.3,1.25,1,2,3\n");
}
