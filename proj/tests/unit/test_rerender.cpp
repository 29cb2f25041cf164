#include <gtest/gtest.h>

#include <fstream>
#include <random>
#include <sstream>

#include "test_support.hpp"

using namespace vito;

namespace {

Scene framed_scene(MediumGrid grid) {
  Scene s = test::backlit_scene(std::move(grid), Spectrum(0.9, 1.0, 1.1));
  s.cameras = {test::axis_camera(12, 12, 25.0)};
  return s;
}

/// Horizontal camera on the ring with a camera-attached backlight, so a light
/// above the medium is out of view.
Scene ring_scene(MediumGrid grid) {
  Scene s;
  s.boundary = grid.shape().bounds;
  s.medium = std::move(grid);
  s.cameras = make_views(s, 1, 3.0, 0.0, ViewRing{12, 12, 25.0, 0.0});
  s.light = make_backlight(3.0, s.cameras[0], Spectrum(0.9, 1.0, 1.1));
  return s;
}

}  // namespace

TEST(Rerender, BrightfieldIsIdentity) {
  const Scene s = framed_scene(make_phantom(PhantomKind::NestedSpheres, 6, 6, 6, test::unit_box()));
  const Scene b = scenario_brightfield(s);
  EXPECT_TRUE(b.medium == s.medium);
  EXPECT_EQ(b.light.corners, s.light.corners);
  EXPECT_TRUE((b.light.radiance == s.light.radiance).all());
  EXPECT_TRUE(render_volpath(b, s.cameras[0], 4, RenderKey{1, 0, 0}) == render_volpath(s, s.cameras[0], 4, RenderKey{1, 0, 0}));
}

TEST(Rerender, DarkfieldOfEmptyMediumIsBlack) {
  const Scene s = ring_scene(MediumGrid(6, 6, 6, test::unit_box()));
  const Scene d = scenario_darkfield(s);
  const Image img = render_volpath(d, s.cameras[0], 16, RenderKey{2, 0, 0});
  for (double v : img.pixels) EXPECT_EQ(v, 0.0);
  // Light sits above the medium and faces down.
  for (const Vec3& c : d.light.corners) EXPECT_GT(c.z(), s.medium.shape().bounds.hi.z());
  EXPECT_TRUE(d.medium == s.medium);
  EXPECT_TRUE((d.light.radiance == s.light.radiance).all());
}

TEST(Rerender, DarkfieldFailsWhenACameraLooksUp) {
  EXPECT_THROW(scenario_darkfield(framed_scene(MediumGrid(4, 4, 4, test::unit_box()))), Error);
}

TEST(Rerender, DarkfieldLightIsOutOfViewOfEveryCamera) {
  Scene s = framed_scene(MediumGrid(4, 4, 4, test::unit_box()));
  s.cameras = make_views(s, 8, 3.0, 35.0, ViewRing{16, 16, 40.0, 0.0});
  const Scene d = scenario_darkfield(s);
  for (const auto& cam : s.cameras)
    for (int y = 0; y < cam.height; ++y)
      for (int x = 0; x < cam.width; ++x)
        EXPECT_FALSE(light_hit(d.light.resolved(cam), generate_ray(cam, x + 0.5, y + 0.5)).has_value());
}

TEST(Rerender, DarkfieldShowsScatteringMedium) {
  const Scene s = ring_scene(test::homogeneous_grid(6, test::unit_box(), Spectrum::Constant(2.0),
                                                      Spectrum::Constant(0.95), 0.0));
  const Image img = render_volpath(scenario_darkfield(s), s.cameras[0], 32, RenderKey{3, 0, 0});
  EXPECT_GT(test::mean(img.pixels), 0.0);
}

TEST(Rerender, InverseDarkfieldOfBlackIsWhite) {
  const Image white = present(Image(5, 5, 0.0), OutputTransform::InvertedTonemap);
  for (double v : white.pixels) EXPECT_EQ(v, 1.0);
  const Scene s = ring_scene(MediumGrid(6, 6, 6, test::unit_box()));
  const Scene inv = scenario_inverse_darkfield(s);
  EXPECT_EQ(inv.output, OutputTransform::InvertedTonemap);
  const Image img = present(render_volpath(inv, s.cameras[0], 4, RenderKey{4, 0, 0}), inv.output);
  for (double v : img.pixels) EXPECT_EQ(v, 1.0);
}

TEST(Rerender, InversionIsExactOnEightBitCodes) {
  std::mt19937_64 rng(51);
  std::uniform_real_distribution<double> u(0.0, 1.3);
  Image img(16, 16);
  for (double& v : img.pixels) v = u(rng);
  const Image inv = present(img, OutputTransform::InvertedTonemap);
  for (std::size_t i = 0; i < img.pixels.size(); ++i)
    EXPECT_EQ(tonemap_8bit(inv.pixels[i]), 255 - tonemap_8bit(img.pixels[i]));
}

TEST(Rerender, SliceOutsideBoundsIsBitIdentical) {
  const Scene s = framed_scene(make_phantom(PhantomKind::NestedSpheres, 6, 6, 6, test::unit_box()));
  const Scene sliced = scenario_slice(s, ClipPlane{Vec3::UnitX(), 2.0});
  const RenderKey key{5, 0, 0};
  EXPECT_TRUE(render_volpath(sliced, s.cameras[0], 8, key) == render_volpath(s, s.cameras[0], 8, key));
  EXPECT_THROW(scenario_slice(s, ClipPlane{Vec3(1, 1, 0), 0.0}), Error);
}

TEST(Rerender, SliceThroughCenterBrightensClippedHalf) {
  Scene s = framed_scene(test::homogeneous_grid(6, test::unit_box(), Spectrum::Constant(1.5), Spectrum::Zero(), 0.0));
  const Camera& cam = s.cameras[0];
  const Image full = render_absorption_only(s, cam);
  const Image half = render_absorption_only(scenario_slice(s, ClipPlane{Vec3::UnitX(), 0.0}), cam);
  for (int y = 0; y < cam.height; ++y)
    for (int x = 0; x < cam.width; ++x) {
      const double wx = generate_ray(cam, x + 0.5, y + 0.5).direction.x();
      const bool through_medium = full.get(x, y)[0] < 0.99 * s.light.radiance[0];
      if (wx > 0.05 && through_medium)
        EXPECT_GT(half.get(x, y)[0], full.get(x, y)[0] * 1.01);
      else if (wx < -0.05)
        EXPECT_EQ(half.get(x, y)[0], full.get(x, y)[0]);
    }
}

TEST(Rerender, ComplementarySlicesPartitionOpticalDepth) {
  const Scene s = framed_scene(make_phantom(PhantomKind::NestedSpheres, 8, 8, 8, test::unit_box()));
  const Vec3 n = Vec3(0.3, -0.5, 0.8).normalized();
  const Scene a = scenario_slice(s, ClipPlane{n, 0.1234567});
  const Scene b = scenario_slice(s, ClipPlane{-n, -0.1234567});
  std::mt19937_64 rng(52);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 50; ++i) {
    const Ray ray{Vec3(u(rng), u(rng), -3.0), Vec3(0.2 * u(rng), 0.2 * u(rng), 1.0).normalized()};
    const Spectrum full = optical_depth(s, ray, 0.0, 6.0);
    const Spectrum sum = optical_depth(a, ray, 0.0, 6.0) + optical_depth(b, ray, 0.0, 6.0);
    for (int c = 0; c < 3; ++c) EXPECT_NEAR(sum[c], full[c], 1e-12 * (1.0 + full[c]));
  }
}

TEST(Rerender, ClearWaterIsBitIdentical) {
  const Scene s = framed_scene(make_phantom(PhantomKind::NestedSpheres, 6, 6, 6, test::unit_box()));
  HomogeneousMedium clear;
  clear.albedo = Spectrum::Constant(0.5);
  const Scene wet = scenario_immerse(s, clear, Box{Vec3(-1.5, -1.5, -1.5), Vec3(1.5, 1.5, 1.5)});
  const RenderKey key{6, 0, 0};
  EXPECT_TRUE(render_volpath(wet, s.cameras[0], 8, key) == render_volpath(s, s.cameras[0], 8, key));
  EXPECT_TRUE(wet.medium == s.medium);
}

TEST(Rerender, AbsorbingWaterScalesBackground) {
  const Box tank{Vec3(-1, -1, -1), Vec3(1, 1, 1)};
  Scene s = framed_scene(MediumGrid(4, 4, 4, test::unit_box()));
  s.jitter = false;
  HomogeneousMedium water;
  water.sigma_t = Spectrum(0.2, 0.5, 0.9);
  const Scene wet = scenario_immerse(s, water, tank);
  const Camera& cam = s.cameras[0];
  // Spectral tracking weights are not binomial; use the spread of batches.
  std::vector<Image> batches;
  for (unsigned b = 0; b < 16; ++b) batches.push_back(render_volpath(wet, cam, 128, RenderKey{7, 0, b}));
  const Image ao = render_absorption_only(wet, cam);
  for (int y = 0; y < cam.height; ++y)
    for (int x = 0; x < cam.width; ++x) {
      const Ray ray = generate_ray(cam, x + 0.5, y + 0.5);
      const auto outer = tank.intersect(ray.origin, ray.direction, 0.0, kInfinity);
      const auto inner = s.medium.shape().bounds.intersect(ray.origin, ray.direction, 0.0, kInfinity);
      ASSERT_TRUE(outer.has_value());
      const double ell = (outer->t1 - outer->t0) - (inner ? inner->t1 - inner->t0 : 0.0);
      for (int c = 0; c < 3; ++c) {
        const double expected = s.light.radiance[c] * std::exp(-water.sigma_t[c] * ell);
        EXPECT_NEAR(ao.get(x, y)[c], expected, 1e-9);
        std::vector<double> xs;
        for (const auto& img : batches) xs.push_back(img.get(x, y)[c]);
        EXPECT_LE(std::abs(test::mean(xs) - expected), 4.5 * test::standard_error(xs)) << x << "," << y << " c" << c;
      }
    }
}

TEST(Rerender, ScatteringWaterBrightensDarkfield) {
  Scene s = ring_scene(MediumGrid(4, 4, 4, test::unit_box()));
  const Box tank{Vec3(-1.5, -1.5, -1.5), Vec3(1.5, 1.5, 1.5)};
  HomogeneousMedium water;
  water.albedo = Spectrum::Ones();
  water.sigma_t = Spectrum::Zero();
  const Scene dark = scenario_darkfield(scenario_immerse(s, water, tank));
  const Image black = render_volpath(dark, s.cameras[0], 16, RenderKey{8, 0, 0});
  water.sigma_t = Spectrum::Constant(0.5);
  const Scene murky = scenario_darkfield(scenario_immerse(s, water, tank));
  const Image lit = render_volpath(murky, s.cameras[0], 16, RenderKey{8, 0, 0});
  EXPECT_EQ(test::mean(black.pixels), 0.0);
  EXPECT_GT(test::mean(lit.pixels), 0.0);
}

TEST(Rerender, TankMustContainMedium) {
  const Scene s = framed_scene(MediumGrid(4, 4, 4, test::unit_box()));
  EXPECT_THROW(scenario_immerse(s, HomogeneousMedium{}, Box{Vec3(-0.2, -1, -1), Vec3(1, 1, 1)}), Error);
  HomogeneousMedium bad;
  bad.g = 1.5;
  EXPECT_THROW(scenario_immerse(s, bad), Error);
}

TEST(WaterTable, ParsesRowsAndComments) {
  std::istringstream in(
      "# name a_r a_g a_b s_r s_g s_b g\n"
      "\n"
      "clear 0.1 0.05 0.02  0.0 0.0 0.0  0.0\n"
      "murky 0.4 0.3 0.2 1.0 1.5 2.0 0.9  # trailing comment\n");
  const auto table = parse_water_table(in);
  ASSERT_EQ(table.size(), 2u);
  const WaterType m = find_water_type(table, "murky");
  EXPECT_EQ(m.sigma_s[2], 2.0);
  EXPECT_EQ(m.g, 0.9);
  const HomogeneousMedium hm = m.medium();
  EXPECT_NEAR(hm.sigma_t[0], 1.4, 1e-12);
  EXPECT_NEAR(hm.albedo[0], 1.0 / 1.4, 1e-12);
  EXPECT_EQ(find_water_type(table, "clear").medium().albedo[1], 0.0);
  EXPECT_THROW(find_water_type(table, "jerlov-I"), Error);
}

TEST(WaterTable, RejectsMalformedRows) {
  for (const char* text : {"w 1 2 3 4 5 6\n", "w 1 2 3 4 5 6 0.1 7\n", "w 1 2 x 4 5 6 0.1\n", "w -1 2 3 4 5 6 0.1\n",
                           "w 1 2 3 4 5 6 1.0\n", "w 1 2 3 4 5 nan 0.1\n", "w 1 2 3 4 5 6e 0.1\n"}) {
    std::istringstream in(text);
    EXPECT_THROW(parse_water_table(in), Error) << text;
  }
}

TEST(WaterTable, ShippedTemplateNeedsFillingIn) {
  std::ifstream in(VITO_DATA_DIR "/water_types.template.txt");
  ASSERT_TRUE(in.good());
  try {
    parse_water_table(in);
    FAIL() << "template with placeholders parsed";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("placeholder"), std::string::npos);
  }
}
