#pragma once

// Voxel-grid and homogeneous media.
//
// Voxel (i, j, k) is centered at bounds.lo + (i + 0.5, j + 0.5, k + 0.5) * voxel_size.
// Storage is channel-major with z fastest, identical to the on-disk layout:
//   index(c, i, j, k) = ((c * nx + i) * ny + j) * nz + k
// Lookups interpolate trilinearly between voxel centers, extend the edge
// voxels up to the box faces and return zero outside the box.

#include <array>
#include <span>
#include <vector>

#include "vito/common.hpp"

namespace vito {

struct GridShape {
  int nx = 0;
  int ny = 0;
  int nz = 0;
  Box bounds;

  std::size_t voxel_count() const {
    return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny) * static_cast<std::size_t>(nz);
  }
  Vec3 voxel_size() const { return bounds.extent().cwiseQuotient(Vec3(nx, ny, nz)); }
  double min_voxel_edge() const { return voxel_size().minCoeff(); }

  std::size_t linear(int i, int j, int k) const {
    return (static_cast<std::size_t>(i) * ny + j) * nz + k;
  }
  std::array<int, 3> coords(std::size_t v) const {
    const int k = static_cast<int>(v % nz);
    const int j = static_cast<int>((v / nz) % ny);
    const int i = static_cast<int>(v / (static_cast<std::size_t>(nz) * ny));
    return {i, j, k};
  }
  Vec3 voxel_center(int i, int j, int k) const {
    return bounds.lo + (Vec3(i, j, k).array() + 0.5).matrix().cwiseProduct(voxel_size());
  }
  bool operator==(const GridShape& o) const {
    return nx == o.nx && ny == o.ny && nz == o.nz && bounds.lo == o.bounds.lo && bounds.hi == o.bounds.hi;
  }

  void validate() const {
    require(nx > 0 && ny > 0 && nz > 0, "grid dimensions must be positive");
    require(bounds.valid(), "grid bounds must be a non-degenerate finite box");
  }
};

/// Trilinear interpolation weights of the eight voxels around a point.
/// Weights of clamped (duplicated) corners are kept separately and sum to 1.
struct Stencil {
  std::array<std::uint32_t, 8> voxel{};
  std::array<double, 8> weight{};
  bool inside = false;

  template <class T>
  double apply(const T* data) const {
    double s = 0.0;
    for (int n = 0; n < 8; ++n) s += weight[n] * static_cast<double>(data[voxel[n]]);
    return s;
  }
};

inline Stencil make_stencil(const GridShape& shape, const Vec3& p) {
  Stencil st;
  if (!shape.bounds.contains(p)) return st;
  st.inside = true;
  const Vec3 u = (p - shape.bounds.lo).cwiseQuotient(shape.voxel_size()).array() - 0.5;
  const int n[3] = {shape.nx, shape.ny, shape.nz};
  int lo[3];
  int hi[3];
  double f[3];
  for (int a = 0; a < 3; ++a) {
    const double fl = std::floor(u[a]);
    f[a] = u[a] - fl;
    const int i0 = static_cast<int>(fl);
    lo[a] = std::clamp(i0, 0, n[a] - 1);
    hi[a] = std::clamp(i0 + 1, 0, n[a] - 1);
  }
  int c = 0;
  for (int di = 0; di < 2; ++di)
    for (int dj = 0; dj < 2; ++dj)
      for (int dk = 0; dk < 2; ++dk, ++c) {
        st.voxel[c] = static_cast<std::uint32_t>(
            shape.linear(di ? hi[0] : lo[0], dj ? hi[1] : lo[1], dk ? hi[2] : lo[2]));
        st.weight[c] = (di ? f[0] : 1.0 - f[0]) * (dj ? f[1] : 1.0 - f[1]) * (dk ? f[2] : 1.0 - f[2]);
      }
  return st;
}

struct HomogeneousMedium {
  Spectrum sigma_t = Spectrum::Zero();
  Spectrum albedo = Spectrum::Zero();
  double g = 0.0;

  Spectrum sigma_s() const { return albedo * sigma_t; }
  Spectrum sigma_a() const { return (1.0 - albedo) * sigma_t; }

  void validate() const {
    require(all_finite(sigma_t) && (sigma_t >= 0.0).all(), "homogeneous sigma_t must be finite and >= 0");
    require(all_finite(albedo) && (albedo >= 0.0).all() && (albedo <= 1.0).all(),
            "homogeneous albedo must lie in [0, 1]");
    require(std::isfinite(g) && std::abs(g) < 1.0, "homogeneous g must lie in (-1, 1)");
  }
};

inline constexpr double kMaxAnisotropy = 0.99;

/// Per-voxel extinction (3 channels), single-scattering albedo (3 channels)
/// and Henyey-Greenstein anisotropy.
class MediumGrid {
 public:
  MediumGrid() = default;

  /// Uniform initialization: sigma_t = 0, albedo = 0.5, g = 0.
  MediumGrid(int nx, int ny, int nz, const Box& bounds) : shape_{nx, ny, nz, bounds} {
    shape_.validate();
    const std::size_t n = shape_.voxel_count();
    sigma_t_.assign(3 * n, 0.0f);
    albedo_.assign(3 * n, 0.5f);
    g_.assign(n, 0.0f);
  }

  const GridShape& shape() const { return shape_; }
  std::size_t voxel_count() const { return shape_.voxel_count(); }

  std::span<float> sigma_t() { return sigma_t_; }
  std::span<const float> sigma_t() const { return sigma_t_; }
  std::span<float> albedo() { return albedo_; }
  std::span<const float> albedo() const { return albedo_; }
  std::span<float> g() { return g_; }
  std::span<const float> g() const { return g_; }

  float& sigma_t(int c, std::size_t v) { return sigma_t_[c * voxel_count() + v]; }
  float sigma_t(int c, std::size_t v) const { return sigma_t_[c * voxel_count() + v]; }
  float& albedo(int c, std::size_t v) { return albedo_[c * voxel_count() + v]; }
  float albedo(int c, std::size_t v) const { return albedo_[c * voxel_count() + v]; }
  float& g(std::size_t v) { return g_[v]; }
  float g(std::size_t v) const { return g_[v]; }

  void set_voxel(std::size_t v, const Spectrum& sigma_t, const Spectrum& albedo, double g) {
    for (int c = 0; c < 3; ++c) {
      this->sigma_t(c, v) = static_cast<float>(sigma_t[c]);
      this->albedo(c, v) = static_cast<float>(albedo[c]);
    }
    g_[v] = static_cast<float>(g);
  }

  Spectrum sigma_t_at(const Stencil& st) const {
    const std::size_t n = voxel_count();
    return {st.apply(sigma_t_.data()), st.apply(sigma_t_.data() + n), st.apply(sigma_t_.data() + 2 * n)};
  }
  Spectrum albedo_at(const Stencil& st) const {
    const std::size_t n = voxel_count();
    return {st.apply(albedo_.data()), st.apply(albedo_.data() + n), st.apply(albedo_.data() + 2 * n)};
  }
  double g_at(const Stencil& st) const { return st.apply(g_.data()); }

  bool operator==(const MediumGrid& o) const {
    return shape_ == o.shape_ && sigma_t_ == o.sigma_t_ && albedo_ == o.albedo_ && g_ == o.g_;
  }

 private:
  GridShape shape_;
  std::vector<float> sigma_t_;
  std::vector<float> albedo_;
  std::vector<float> g_;
};

inline Spectrum lookup_sigma_t(const MediumGrid& grid, const Vec3& p) {
  const Stencil st = make_stencil(grid.shape(), p);
  return st.inside ? grid.sigma_t_at(st) : Spectrum::Zero();
}

inline Spectrum lookup_albedo(const MediumGrid& grid, const Vec3& p) {
  const Stencil st = make_stencil(grid.shape(), p);
  return st.inside ? grid.albedo_at(st) : Spectrum::Zero();
}

inline double lookup_g(const MediumGrid& grid, const Vec3& p) {
  const Stencil st = make_stencil(grid.shape(), p);
  return st.inside ? grid.g_at(st) : 0.0;
}

/// Per-channel maximum of sigma_t over all voxels.
inline Spectrum majorant(const MediumGrid& grid) {
  Spectrum m = Spectrum::Zero();
  const std::size_t n = grid.voxel_count();
  const auto s = grid.sigma_t();
  for (int c = 0; c < 3; ++c)
    for (std::size_t v = 0; v < n; ++v) m[c] = std::max(m[c], static_cast<double>(s[c * n + v]));
  return m;
}

/// Projects every entry back onto its admissible range in place.
inline void clamp_in_place(MediumGrid& grid) {
  for (float& x : grid.sigma_t()) {
    require(!std::isnan(x), "NaN in sigma_t: optimization diverged");
    x = std::max(x, 0.0f);
  }
  for (float& x : grid.albedo()) {
    require(!std::isnan(x), "NaN in albedo: optimization diverged");
    x = std::clamp(x, 0.0f, 1.0f);
  }
  for (float& x : grid.g()) {
    require(!std::isnan(x), "NaN in g: optimization diverged");
    x = std::clamp(x, static_cast<float>(-kMaxAnisotropy), static_cast<float>(kMaxAnisotropy));
  }
}

inline MediumGrid clamp_parameters(MediumGrid grid) {
  clamp_in_place(grid);
  return grid;
}

/// Checks the stored-value invariants (used after loading from disk).
inline void validate(const MediumGrid& grid) {
  grid.shape().validate();
  for (float x : grid.sigma_t()) require(std::isfinite(x) && x >= 0.0f, "sigma_t entries must be finite and >= 0");
  for (float x : grid.albedo()) require(x >= 0.0f && x <= 1.0f, "albedo entries must lie in [0, 1]");
  for (float x : grid.g())
    require(std::abs(x) <= static_cast<float>(kMaxAnisotropy), "g entries must lie in [-0.99, 0.99]");
}

/// Stand-in for a trained emissive radiance field: scalar density and one
/// emitted RGB color per voxel (the directional dependence is averaged out).
class EmissiveGrid {
 public:
  EmissiveGrid() = default;
  EmissiveGrid(int nx, int ny, int nz, const Box& bounds) : shape_{nx, ny, nz, bounds} {
    shape_.validate();
    density_.assign(shape_.voxel_count(), 0.0f);
    color_.assign(3 * shape_.voxel_count(), 0.0f);
  }

  const GridShape& shape() const { return shape_; }
  std::size_t voxel_count() const { return shape_.voxel_count(); }

  std::span<float> density() { return density_; }
  std::span<const float> density() const { return density_; }
  std::span<float> color() { return color_; }
  std::span<const float> color() const { return color_; }

  float& density(std::size_t v) { return density_[v]; }
  float density(std::size_t v) const { return density_[v]; }
  float& color(int c, std::size_t v) { return color_[c * voxel_count() + v]; }
  float color(int c, std::size_t v) const { return color_[c * voxel_count() + v]; }

  double density_at(const Stencil& st) const { return st.apply(density_.data()); }
  Spectrum color_at(const Stencil& st) const {
    const std::size_t n = voxel_count();
    return {st.apply(color_.data()), st.apply(color_.data() + n), st.apply(color_.data() + 2 * n)};
  }

  bool operator==(const EmissiveGrid& o) const {
    return shape_ == o.shape_ && density_ == o.density_ && color_ == o.color_;
  }

 private:
  GridShape shape_;
  std::vector<float> density_;
  std::vector<float> color_;
};

inline void validate(const EmissiveGrid& grid) {
  grid.shape().validate();
  for (float x : grid.density()) require(std::isfinite(x) && x >= 0.0f, "emissive density must be finite and >= 0");
  for (float x : grid.color()) require(std::isfinite(x) && x >= 0.0f, "emissive color must be finite and >= 0");
}

}  // namespace vito
