#pragma once

// Synthetic ground-truth media and turntable-like view rings.

#include <string>
#include <vector>

#include "vito/sensor.hpp"
#include "vito/transport.hpp"

namespace vito {

enum class PhantomKind { NestedSpheres, CheckerSlab, PointAbsorber };

inline PhantomKind parse_phantom_kind(const std::string& name) {
  if (name == "nested-spheres") return PhantomKind::NestedSpheres;
  if (name == "checker-slab") return PhantomKind::CheckerSlab;
  if (name == "point-absorber") return PhantomKind::PointAbsorber;
  throw Error("unknown phantom kind '" + name + "' (expected nested-spheres, checker-slab or point-absorber)");
}

namespace detail {

/// 1 well inside radius r0, 0 outside, C1 ramp of the given width.
inline double soft_ball(double r, double r0, double width) {
  const double t = std::clamp((r0 + 0.5 * width - r) / width, 0.0, 1.0);
  return t * t * (3.0 - 2.0 * t);
}

}  // namespace detail

// Coefficient values are optical depths per smallest box extent, so the
// phantom looks the same at any physical size.
inline constexpr double kShellDepth = 1.5;
inline constexpr double kCoreDepth = 2.0;
inline const Spectrum kCoreTint(1.2, 1.0, 0.8);

/// Parameter fields sampled at voxel centers. Entries outside the specimen
/// keep the uniform defaults (sigma_t 0, albedo 0.5, g 0).
inline MediumGrid make_phantom(PhantomKind kind, int nx, int ny, int nz, const Box& bounds) {
  require(nx >= 4 && ny >= 4 && nz >= 4, "phantom dims must be >= 4 per axis");
  MediumGrid grid(nx, ny, nz, bounds);
  const auto& s = grid.shape();
  const double extent = bounds.extent().minCoeff();
  const Vec3 c = bounds.center();

  switch (kind) {
    case PhantomKind::NestedSpheres:
      for (int i = 0; i < nx; ++i)
        for (int j = 0; j < ny; ++j)
          for (int k = 0; k < nz; ++k) {
            const double r = (s.voxel_center(i, j, k) - c).norm() / (0.5 * extent);
            const double shell = detail::soft_ball(r, 0.8, 0.15);
            const double core = detail::soft_ball(r, 0.4, 0.15);
            if (shell == 0.0) continue;
            const Spectrum sigma = (kShellDepth * shell + kCoreDepth * core * kCoreTint) / extent;
            const Spectrum albedo = (1.0 - core) * Spectrum(0.8, 0.8, 0.8) + core * Spectrum(0.5, 0.6, 0.7);
            const double g = (1.0 - core) * 0.2 + core * 0.5;
            grid.set_voxel(s.linear(i, j, k), sigma, albedo, g);
          }
      break;
    case PhantomKind::CheckerSlab:
      for (int i = 0; i < nx; ++i)
        for (int j = 0; j < ny; ++j)
          for (int k = 0; k < nz; ++k) {
            const Vec3 q = (s.voxel_center(i, j, k) - bounds.lo).cwiseQuotient(bounds.extent());
            if (std::abs(q.z() - 0.5) >= 0.25) continue;
            const int cell = static_cast<int>(std::floor(4.0 * q.x())) + static_cast<int>(std::floor(4.0 * q.y()));
            const double depth = cell % 2 == 0 ? 1.0 : 3.0;
            grid.set_voxel(s.linear(i, j, k), Spectrum::Constant(depth / extent), Spectrum::Constant(0.5), 0.0);
          }
      break;
    case PhantomKind::PointAbsorber:
      grid.set_voxel(s.linear(nx / 2, ny / 2, nz / 2), Spectrum::Constant(10.0 / extent), Spectrum::Zero(), 0.0);
      break;
  }
  return grid;
}

inline MediumGrid make_phantom(const std::string& kind, int nx, int ny, int nz, const Box& bounds) {
  return make_phantom(parse_phantom_kind(kind), nx, ny, nz, bounds);
}

/// Emissive grid whose inverse emittance under `light` reproduces the
/// extinction of `medium`: density is the channel mean of sigma_t and the
/// color is light - sigma_t / density (light where the density is zero),
/// clamped at 0. Exact only when light >= sigma_t / density everywhere.
inline EmissiveGrid emissive_twin(const MediumGrid& medium, const Spectrum& light) {
  require(light.isFinite().all() && (light >= 0.0).all(), "emissive_twin: light must be finite and >= 0");
  const auto& s = medium.shape();
  EmissiveGrid em(s.nx, s.ny, s.nz, s.bounds);
  for (std::size_t v = 0; v < medium.voxel_count(); ++v) {
    const double density = (double(medium.sigma_t(0, v)) + medium.sigma_t(1, v) + medium.sigma_t(2, v)) / 3.0;
    em.density(v) = static_cast<float>(density);
    for (int c = 0; c < 3; ++c)
      em.color(c, v) = static_cast<float>(density > 0.0 ? std::max(0.0, light[c] - medium.sigma_t(c, v) / density) : light[c]);
  }
  return em;
}

struct ViewRing {
  int width = 32;
  int height = 32;
  double vertical_fov_deg = 30.0;
  double azimuth_offset_deg = 0.0;
};

/// n cameras on a horizontal ring (world z up) around the medium center,
/// camera i at azimuth offset + 360 i / n, measured from +x toward +y.
inline std::vector<Camera> make_views(const Scene& scene, int n, double radius, double elevation_deg,
                                      const ViewRing& ring = {}) {
  require(n >= 1, "make_views needs n >= 1");
  require(radius > 0.0, "ring radius must be > 0");
  const Vec3 center = scene.medium.shape().bounds.center();
  const double e = elevation_deg * kPi / 180.0;
  std::vector<Camera> cams;
  for (int i = 0; i < n; ++i) {
    const double a = (ring.azimuth_offset_deg + 360.0 * i / n) * kPi / 180.0;
    const Vec3 eye = center + radius * Vec3(std::cos(e) * std::cos(a), std::cos(e) * std::sin(a), std::sin(e));
    cams.push_back(look_at(eye, center, Vec3::UnitZ(), ring.width, ring.height, ring.vertical_fov_deg));
  }
  return cams;
}

/// Camera-attached backlight: a quad facing the camera on its optical axis
/// at distance 2 * radius, large enough to fill the whole field of view.
inline LightSource make_backlight(double radius, const Camera& cam, const Spectrum& radiance) {
  const double depth = 2.0 * radius;
  const double half_w = 0.5 * cam.sensor_width / cam.fx * depth;
  const double half_h = 0.5 * cam.sensor_height / cam.fy * depth;
  const double half = 1.5 * std::max(half_w, half_h) +
                      depth * std::max(std::abs(cam.cx - 0.5 * cam.sensor_width) / cam.fx,
                                       std::abs(cam.cy - 0.5 * cam.sensor_height) / cam.fy);
  return make_quad_light(Vec3(0.0, 0.0, depth), Vec3::UnitZ(), Vec3::UnitX(), half, half, radiance, LightFrame::Camera);
}

}  // namespace vito
