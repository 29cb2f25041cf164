#include <gtest/gtest.h>

#include "test_support.hpp"

using namespace vito;

TEST(Phantom, PointAbsorberIsOneVoxel) {
  const MediumGrid m = make_phantom("point-absorber", 7, 6, 5, test::unit_box());
  std::size_t nonzero = 0, where = 0;
  for (std::size_t v = 0; v < m.voxel_count(); ++v)
    if (m.sigma_t(0, v) != 0.0f || m.sigma_t(1, v) != 0.0f || m.sigma_t(2, v) != 0.0f) {
      ++nonzero;
      where = v;
    }
  EXPECT_EQ(nonzero, 1u);
  EXPECT_EQ(where, m.shape().linear(3, 3, 2));
}

TEST(Phantom, NestedSpheresCoreIsDenserThanShell) {
  const int n = 32;
  const MediumGrid m = make_phantom("nested-spheres", n, n, n, test::unit_box());
  EXPECT_NO_THROW(validate(m));
  // Center voxel versus a voxel at 0.65 of the half extent along x.
  const std::size_t core = m.shape().linear(n / 2, n / 2, n / 2);
  const std::size_t shell = m.shape().linear(n / 2 + static_cast<int>(0.65 * n / 2), n / 2, n / 2);
  for (int c = 0; c < 3; ++c) {
    EXPECT_GT(m.sigma_t(c, shell), 0.0f);
    EXPECT_GT(m.sigma_t(c, core), m.sigma_t(c, shell)) << c;
  }
  EXPECT_NE(m.sigma_t(0, core), m.sigma_t(2, core));
  EXPECT_EQ(m.sigma_t(0, 0), 0.0f);
}

TEST(Phantom, CheckerSlabAlternates) {
  const int n = 16;
  const MediumGrid m = make_phantom("checker-slab", n, n, n, test::unit_box());
  EXPECT_NO_THROW(validate(m));
  const int k = n / 2;
  for (int cell = 0; cell + 1 < 4; ++cell) {
    const int i = cell * n / 4 + 1;
    EXPECT_NE(m.sigma_t(0, m.shape().linear(i, 1, k)), m.sigma_t(0, m.shape().linear(i + n / 4, 1, k)));
    EXPECT_NE(m.sigma_t(0, m.shape().linear(1, i, k)), m.sigma_t(0, m.shape().linear(1, i + n / 4, k)));
  }
  EXPECT_EQ(m.sigma_t(0, m.shape().linear(3, 3, 0)), 0.0f);
}

TEST(Phantom, ScaleInvariantOpticalDepth) {
  const MediumGrid a = make_phantom("nested-spheres", 8, 8, 8, test::unit_box());
  const MediumGrid b = make_phantom("nested-spheres", 8, 8, 8, Box{Vec3::Constant(-2.0), Vec3::Constant(2.0)});
  for (std::size_t v = 0; v < a.voxel_count(); ++v)
    EXPECT_NEAR(a.sigma_t(1, v), 4.0f * b.sigma_t(1, v), 1e-5f * a.sigma_t(1, v) + 1e-7f);
}

TEST(Phantom, InvalidArgumentsAreErrors) {
  EXPECT_THROW(make_phantom("smoke-ring", 8, 8, 8, test::unit_box()), Error);
  EXPECT_THROW(make_phantom("nested-spheres", 3, 8, 8, test::unit_box()), Error);
  EXPECT_THROW(make_phantom("checker-slab", 8, 8, 2, test::unit_box()), Error);
}

TEST(Phantom, RefinementConvergesQuadratically) {
  // Probes sit inside the smooth ramps of the shell and the core, away from
  // the ramp ends where the field is only C1. Snapping them to voxel corners
  // of the coarsest grid keeps them halfway between voxel centers at every
  // level, so the leading error term shrinks by exactly 4.
  const Box box = test::unit_box();
  auto snap = [&](const Vec3& p) { return ((p - box.lo) * 32.0).array().round().matrix() / 32.0 + box.lo; };
  const std::vector<Vec3> probes = {
      snap(0.5 * 0.80 * Vec3(1.0, 0.0, 0.0)),
      snap(0.5 * 0.79 * Vec3(0.6, 0.0, 0.8)),
      snap(0.5 * 0.41 * Vec3(1.0, 1.0, 1.0).normalized()),
  };
  std::vector<std::vector<double>> values;
  for (int n : {32, 64, 128}) {
    const MediumGrid m = make_phantom("nested-spheres", n, n, n, box);
    std::vector<double> row;
    for (const Vec3& p : probes) row.push_back(lookup_sigma_t(m, p)[1]);
    values.push_back(row);
  }
  for (std::size_t i = 0; i < probes.size(); ++i) {
    const double d1 = std::abs(values[0][i] - values[1][i]);
    const double d2 = std::abs(values[1][i] - values[2][i]);
    EXPECT_GT(d1, 0.0) << i;
    // First order would shrink by 2, second order by 4.
    EXPECT_LT(d2, d1 / 3.0) << i << ": " << d1 << " -> " << d2;
  }
}

TEST(Phantom, EmissiveTwinInvertsToTheMedium) {
  const MediumGrid truth = make_phantom("nested-spheres", 8, 8, 8, test::unit_box());
  const Spectrum light(1.25, 1.25, 1.25);
  const EmissiveGrid em = emissive_twin(truth, light);
  EXPECT_NO_THROW(validate(em));
  const MediumGrid back = inverse_emittance(em, light);
  for (std::size_t i = 0; i < truth.sigma_t().size(); ++i)
    EXPECT_NEAR(back.sigma_t()[i], truth.sigma_t()[i], 1e-5 * (1.0 + truth.sigma_t()[i]));
  // Too dim a light cannot reproduce the tinted core; colors clamp instead of going negative.
  EXPECT_NO_THROW(validate(emissive_twin(truth, Spectrum::Constant(0.5))));
}

TEST(Phantom, SingleViewAtAzimuthZero) {
  Scene scene;
  scene.medium = MediumGrid(4, 4, 4, Box{Vec3(1, 2, 3), Vec3(3, 4, 5)});
  const auto cams = make_views(scene, 1, 5.0, 0.0);
  ASSERT_EQ(cams.size(), 1u);
  EXPECT_NEAR((cams[0].center() - Vec3(7, 3, 4)).norm(), 0.0, 1e-12);
}

TEST(Phantom, ViewAxesPassThroughCenter) {
  Scene scene;
  scene.medium = MediumGrid(4, 4, 4, Box{Vec3(-1, 0, 2), Vec3(1, 3, 4)});
  const Vec3 center = scene.medium.shape().bounds.center();
  for (double elevation : {0.0, 20.0, -35.0}) {
    for (const Camera& cam : make_views(scene, 7, 3.5, elevation)) {
      const Vec3 to_center = center - cam.center();
      EXPECT_NEAR(to_center.norm(), 3.5, 1e-12);
      EXPECT_NEAR(cam.optical_axis().cross(to_center.normalized()).norm(), 0.0, 1e-9);
      EXPECT_GT(cam.optical_axis().dot(to_center), 0.0);
    }
  }
}

TEST(Phantom, FourViewsAreQuarterTurns) {
  Scene scene;
  scene.medium = MediumGrid(4, 4, 4, test::unit_box());
  const auto cams = make_views(scene, 4, 2.0, 0.0);
  ASSERT_EQ(cams.size(), 4u);
  const Vec3 expected[4] = {Vec3(2, 0, 0), Vec3(0, 2, 0), Vec3(-2, 0, 0), Vec3(0, -2, 0)};
  for (int i = 0; i < 4; ++i) EXPECT_NEAR((cams[i].center() - expected[i]).norm(), 0.0, 1e-12) << i;
}

TEST(Phantom, BacklightFillsTheView) {
  Scene scene;
  scene.medium = MediumGrid(4, 4, 4, test::unit_box());
  scene.cameras = make_views(scene, 3, 3.0, 10.0);
  scene.light = make_backlight(3.0, scene.cameras[0], Spectrum::Constant(0.7));
  scene.boundary = scene.medium.shape().bounds;
  for (std::size_t v = 0; v < scene.cameras.size(); ++v) {
    const Image img = render_absorption_only(scene, scene.cameras[v]);
    for (double x : img.pixels) EXPECT_NEAR(x, 0.7, 1e-12);
  }
}
