#pragma once

// Initialization of a physically-based medium from an emissive volume.

#include <vector>

#include "vito/image.hpp"
#include "vito/phase.hpp"
#include "vito/sensor.hpp"
#include "vito/volume.hpp"

namespace vito {

/// Mean emitted color of voxel v over n directions spread on the sphere.
/// The stand-in grid stores one color per voxel, so every direction returns
/// the same value; the loop is the extension point for directional colors.
inline Spectrum mean_emission(const EmissiveGrid& em, std::size_t v, int n_directions = 1) {
  require(n_directions >= 1, "mean_emission needs at least one direction");
  Spectrum sum = Spectrum::Zero();
  for (int i = 0; i < n_directions; ++i) {
    // Fibonacci sphere point (theta, phi); unused by the per-voxel color.
    [[maybe_unused]] const double cos_theta = 1.0 - 2.0 * (i + 0.5) / n_directions;
    [[maybe_unused]] const double phi = kPi * (3.0 - std::sqrt(5.0)) * i;
    sum += Spectrum(em.color(0, v), em.color(1, v), em.color(2, v));
  }
  return sum / n_directions;
}

/// sigma_t = density * (light - mean emitted color), clamped at zero per
/// channel. Albedo and g keep their uniform defaults (0.5 and 0).
inline MediumGrid inverse_emittance(const EmissiveGrid& em, const Spectrum& light, int n_directions = 1) {
  require(all_finite(light), "inverse_emittance: light radiance must be finite");
  const auto& s = em.shape();
  MediumGrid grid(s.nx, s.ny, s.nz, s.bounds);
  for (std::size_t v = 0; v < em.voxel_count(); ++v) {
    const Spectrum sigma = (em.density(v) * (light - mean_emission(em, v, n_directions))).max(0.0);
    for (int c = 0; c < 3; ++c) grid.sigma_t(c, v) = static_cast<float>(sigma[c]);
  }
  return grid;
}

/// Voxel-aligned box around every voxel with density > threshold, grown by
/// one voxel on each side and clipped to the grid bounds.
inline Box extract_boundary(const EmissiveGrid& em, double threshold) {
  require(threshold >= 0.0, "extract_boundary: threshold must be >= 0");
  const auto& s = em.shape();
  int lo[3] = {s.nx, s.ny, s.nz};
  int hi[3] = {-1, -1, -1};
  for (std::size_t v = 0; v < em.voxel_count(); ++v) {
    if (!(em.density(v) > threshold)) continue;
    const auto ijk = s.coords(v);
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::min(lo[a], ijk[a]);
      hi[a] = std::max(hi[a], ijk[a]);
    }
  }
  require(hi[0] >= 0, "extract_boundary: no voxel above the density threshold (empty specimen)");
  const int n[3] = {s.nx, s.ny, s.nz};
  const Vec3 d = s.voxel_size();
  Box box;
  for (int a = 0; a < 3; ++a) {
    const int i0 = std::max(lo[a] - 1, 0);
    const int i1 = std::min(hi[a] + 2, n[a]);
    box.lo[a] = i0 == 0 ? s.bounds.lo[a] : s.bounds.lo[a] + i0 * d[a];
    box.hi[a] = i1 == n[a] ? s.bounds.hi[a] : s.bounds.lo[a] + i1 * d[a];
  }
  return box;
}

/// Sub-grid of the voxels whose centers lie inside `box` (a box returned by
/// extract_boundary selects exactly its voxels).
inline EmissiveGrid crop(const EmissiveGrid& em, const Box& box) {
  const auto& s = em.shape();
  const Vec3 d = s.voxel_size();
  int lo[3];
  int hi[3];
  const int n[3] = {s.nx, s.ny, s.nz};
  for (int a = 0; a < 3; ++a) {
    lo[a] = std::clamp(static_cast<int>(std::ceil((box.lo[a] - s.bounds.lo[a]) / d[a] - 0.5)), 0, n[a]);
    hi[a] = std::clamp(static_cast<int>(std::floor((box.hi[a] - s.bounds.lo[a]) / d[a] - 0.5)) + 1, 0, n[a]);
    require(hi[a] > lo[a], "crop: box contains no voxel center");
  }
  Box b;
  for (int a = 0; a < 3; ++a) {
    b.lo[a] = lo[a] == 0 ? s.bounds.lo[a] : s.bounds.lo[a] + lo[a] * d[a];
    b.hi[a] = hi[a] == n[a] ? s.bounds.hi[a] : s.bounds.lo[a] + hi[a] * d[a];
  }
  EmissiveGrid out(hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2], b);
  for (int i = lo[0]; i < hi[0]; ++i)
    for (int j = lo[1]; j < hi[1]; ++j)
      for (int k = lo[2]; k < hi[2]; ++k) {
        const std::size_t src = s.linear(i, j, k);
        const std::size_t dst = out.shape().linear(i - lo[0], j - lo[1], k - lo[2]);
        out.density(dst) = em.density(src);
        for (int c = 0; c < 3; ++c) out.color(c, dst) = em.color(c, src);
      }
  return out;
}

/// Initial light radiance: per-channel 99th percentile of all pixels of the
/// reference images. Background pixels dominate brightfield captures, so the
/// percentile lands on the unobstructed light.
inline Spectrum light_bootstrap(const std::vector<Image>& images, double percentile = 0.99) {
  require(!images.empty(), "light_bootstrap needs at least one image");
  Spectrum out;
  std::vector<double> values;
  for (int c = 0; c < 3; ++c) {
    values.clear();
    for (const auto& img : images)
      for (std::size_t p = 0; p < img.pixel_count(); ++p) values.push_back(img.pixels[3 * p + c]);
    const auto rank = static_cast<std::size_t>(std::floor(percentile * static_cast<double>(values.size() - 1)));
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(rank), values.end());
    out[c] = values[rank];
  }
  return out;
}

}  // namespace vito
