#pragma once

// Scene variants for presenting a reconstructed volume: relighting, slicing
// and immersion. All of them only recompose the Scene; rendering is
// render_volpath unchanged.

#include <istream>
#include <sstream>
#include <string>
#include <vector>

#include "vito/transport.hpp"

namespace vito {

/// Samples per pixel of the high-quality re-render preset.
inline constexpr int kRerenderSpp = 2048;

inline Scene scenario_brightfield(const Scene& scene) { return scene; }

namespace detail {

/// Conservative test whether any camera could see the light directly: the
/// light counts as visible when the bounding rectangle of its projected
/// corners overlaps the (jittered) pixel window, or when it straddles the
/// camera plane.
inline bool light_visible(const Scene& scene, const LightSource& light) {
  for (const auto& cam : scene.cameras) {
    const LightSource w = light.resolved(cam);
    double x0 = kInfinity, x1 = -kInfinity, y0 = kInfinity, y1 = -kInfinity;
    int in_front = 0;
    for (const Vec3& c : w.corners) {
      const Vec3 local = cam.rotation.transpose() * (c - cam.center());
      if (local.z() <= 0.0) continue;
      ++in_front;
      const auto [px, py] = project_direction(cam, c - cam.center());
      x0 = std::min(x0, px);
      x1 = std::max(x1, px);
      y0 = std::min(y0, py);
      y1 = std::max(y1, py);
    }
    if (in_front == 0) continue;
    if (in_front < 4) return true;
    if (x1 >= 0.0 && x0 <= cam.width && y1 >= 0.0 && y0 <= cam.height) return true;
  }
  return false;
}

}  // namespace detail

/// Light moved above the medium (world +z), facing down, covering the
/// medium's footprint. It is raised until no camera sees it directly.
inline Scene scenario_darkfield(const Scene& scene) {
  Scene out = scene;
  const Box& b = scene.medium.shape().bounds;
  const Vec3 ext = b.extent();
  double offset = 0.5 * ext.z();
  for (int attempt = 0; attempt < 40; ++attempt, offset *= 1.5) {
    const Vec3 center(b.center().x(), b.center().y(), b.hi.z() + offset);
    LightSource light =
        make_quad_light(center, -Vec3::UnitZ(), Vec3::UnitX(), 0.5 * ext.x(), 0.5 * ext.y(), scene.light.radiance);
    if (!detail::light_visible(scene, light)) {
      out.light = light;
      return out;
    }
  }
  throw Error("darkfield: could not place the light out of every camera's view");
}

/// Darkfield whose 8-bit output is inverted per channel (255 - v).
inline Scene scenario_inverse_darkfield(const Scene& scene) {
  Scene out = scenario_darkfield(scene);
  out.output = OutputTransform::InvertedTonemap;
  return out;
}

/// Removes the medium on the side where dot(normal, x) > offset.
inline Scene scenario_slice(const Scene& scene, const ClipPlane& plane) {
  require(std::abs(plane.normal.norm() - 1.0) < 1e-9, "slice plane normal must be unit length");
  Scene out = scene;
  out.clip_planes.push_back(plane);
  return out;
}

/// Fills the region between the boundary (optionally replaced by `tank`)
/// and the medium bounds with a homogeneous medium.
inline Scene scenario_immerse(const Scene& scene, const HomogeneousMedium& water,
                              const std::optional<Box>& tank = std::nullopt) {
  water.validate();
  Scene out = scene;
  out.immersion = water;
  if (tank) {
    require(tank->valid() && tank->contains(scene.medium.shape().bounds), "tank must contain the medium bounds");
    out.boundary = *tank;
  }
  return out;
}

struct WaterType {
  std::string name;
  Spectrum sigma_a = Spectrum::Zero();
  Spectrum sigma_s = Spectrum::Zero();
  double g = 0.0;

  HomogeneousMedium medium() const {
    HomogeneousMedium m;
    m.sigma_t = sigma_a + sigma_s;
    for (int c = 0; c < 3; ++c) m.albedo[c] = m.sigma_t[c] > 0.0 ? sigma_s[c] / m.sigma_t[c] : 0.0;
    m.g = g;
    return m;
  }
};

/// Water table: one row per type, whitespace separated
///   name sigma_a_r sigma_a_g sigma_a_b sigma_s_r sigma_s_g sigma_s_b g
/// Blank lines and text after '#' are ignored.
inline std::vector<WaterType> parse_water_table(std::istream& in) {
  std::vector<WaterType> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    std::vector<std::string> tok;
    for (std::string t; ss >> t;) tok.push_back(t);
    if (tok.empty()) continue;
    const std::string where = "water table line " + std::to_string(line_no);
    require(tok.size() == 8, where + ": expected 8 fields, got " + std::to_string(tok.size()));
    WaterType w;
    w.name = tok[0];
    double vals[7] = {};
    for (int i = 0; i < 7; ++i) {
      std::size_t used = 0;
      try {
        vals[i] = std::stod(tok[i + 1], &used);
      } catch (const std::exception&) {
        used = 0;
      }
      require(used == tok[i + 1].size() && std::isfinite(vals[i]),
              where + ": field '" + tok[i + 1] + "' is not a number (fill in the template placeholders)");
    }
    w.sigma_a = Spectrum(vals[0], vals[1], vals[2]);
    w.sigma_s = Spectrum(vals[3], vals[4], vals[5]);
    w.g = vals[6];
    require((w.sigma_a >= 0.0).all() && (w.sigma_s >= 0.0).all(), where + ": coefficients must be >= 0");
    require(std::abs(w.g) < 1.0, where + ": g must lie in (-1, 1)");
    out.push_back(w);
  }
  return out;
}

inline WaterType find_water_type(const std::vector<WaterType>& table, const std::string& name) {
  for (const auto& w : table)
    if (w.name == name) return w;
  throw Error("water type '" + name + "' not found in table");
}

}  // namespace vito
