#pragma once

// Gradients of image losses with respect to the voxel grid and the light.
//
// grad_volpath uses path replay: pass 1 traces every sample of a pixel and
// keeps only its contribution; pass 2 re-creates each light-carrying path from
// the same sample stream and distributes the pixel adjoint over the factors of
// that path. Memory per pixel is O(spp), independent of path length.

#include <unordered_map>
#include <vector>

#include "vito/metrics.hpp"
#include "vito/transport.hpp"

namespace vito {

struct GradientSet {
  GridShape shape;
  std::vector<double> d_sigma_t;  ///< 3 x voxels, channel-major like MediumGrid
  std::vector<double> d_albedo;   ///< 3 x voxels
  std::vector<double> d_g;        ///< voxels
  Spectrum d_light = Spectrum::Zero();
  /// Sorted voxel indices with any nonzero gradient entry.
  std::vector<std::uint32_t> touched;

  GradientSet() = default;
  explicit GradientSet(const GridShape& s)
      : shape(s), d_sigma_t(3 * s.voxel_count(), 0.0), d_albedo(3 * s.voxel_count(), 0.0), d_g(s.voxel_count(), 0.0) {}

  std::size_t voxel_count() const { return shape.voxel_count(); }

  double& sigma_t(int c, std::size_t v) { return d_sigma_t[c * voxel_count() + v]; }
  double sigma_t(int c, std::size_t v) const { return d_sigma_t[c * voxel_count() + v]; }
  double& albedo(int c, std::size_t v) { return d_albedo[c * voxel_count() + v]; }
  double albedo(int c, std::size_t v) const { return d_albedo[c * voxel_count() + v]; }

  bool voxel_nonzero(std::size_t v) const {
    for (int c = 0; c < 3; ++c)
      if (sigma_t(c, v) != 0.0 || albedo(c, v) != 0.0) return true;
    return d_g[v] != 0.0;
  }

  void rebuild_touched() {
    touched.clear();
    for (std::size_t v = 0; v < voxel_count(); ++v)
      if (voxel_nonzero(v)) touched.push_back(static_cast<std::uint32_t>(v));
  }

  bool finite() const {
    auto ok = [](const std::vector<double>& xs) {
      for (double x : xs)
        if (!std::isfinite(x)) return false;
      return true;
    };
    return ok(d_sigma_t) && ok(d_albedo) && ok(d_g) && all_finite(d_light);
  }

  /// Element-wise sum; `touched` is recomputed.
  GradientSet& operator+=(const GradientSet& o) {
    require(shape == o.shape, "GradientSet shapes differ");
    for (std::size_t i = 0; i < d_sigma_t.size(); ++i) d_sigma_t[i] += o.d_sigma_t[i];
    for (std::size_t i = 0; i < d_albedo.size(); ++i) d_albedo[i] += o.d_albedo[i];
    for (std::size_t i = 0; i < d_g.size(); ++i) d_g[i] += o.d_g[i];
    d_light += o.d_light;
    rebuild_touched();
    return *this;
  }

  void scale(double s) {
    for (double& x : d_sigma_t) x *= s;
    for (double& x : d_albedo) x *= s;
    for (double& x : d_g) x *= s;
    d_light *= s;
    rebuild_touched();
  }
};

namespace detail {

/// Per-tile gradient buffer. Dense for small grids, hashed otherwise; merged
/// into a GradientSet in tile order so the sum is reproducible.
class TileGradient {
 public:
  static constexpr std::size_t kDenseLimit = 1u << 17;
  static constexpr int kSlots = 7;  // sigma_t x3, albedo x3, g

  explicit TileGradient(std::size_t voxels) : voxels_(voxels), dense_(voxels <= kDenseLimit) {}

  double* voxel(std::uint32_t v) {
    if (dense_) {
      if (values_.empty()) values_.assign(voxels_ * kSlots, 0.0);
      return &values_[static_cast<std::size_t>(v) * kSlots];
    }
    return sparse_.try_emplace(v).first->second.data();
  }

  Spectrum d_light = Spectrum::Zero();

  void merge_into(GradientSet& out) const {
    auto add = [&](std::size_t v, const double* s) {
      for (int c = 0; c < 3; ++c) {
        out.sigma_t(c, v) += s[c];
        out.albedo(c, v) += s[3 + c];
      }
      out.d_g[v] += s[6];
    };
    if (dense_) {
      if (!values_.empty())
        for (std::size_t v = 0; v < voxels_; ++v) add(v, &values_[v * kSlots]);
    } else {
      std::vector<std::uint32_t> keys;
      keys.reserve(sparse_.size());
      for (const auto& kv : sparse_) keys.push_back(kv.first);
      std::sort(keys.begin(), keys.end());
      for (auto v : keys) add(v, sparse_.at(v).data());
    }
    out.d_light += d_light;
  }

 private:
  std::size_t voxels_;
  bool dense_;
  std::vector<double> values_;
  std::unordered_map<std::uint32_t, std::array<double, kSlots>> sparse_;
};

/// Product of a path's factors, kept as (product of nonzero factors, number
/// of zero factors) per channel so partial derivatives stay exact when one
/// factor vanishes.
struct FactorProduct {
  Spectrum nonzero = Spectrum::Ones();
  Eigen::Array3i zeros = Eigen::Array3i::Zero();
  bool emitted = false;

  void multiply(const Spectrum& f) {
    for (int c = 0; c < 3; ++c) {
      if (f[c] == 0.0)
        ++zeros[c];
      else
        nonzero[c] *= f[c];
    }
  }
  /// Product of all factors except `f` (which is one of them).
  double others(int c, double f) const {
    if (zeros[c] == 0) return nonzero[c] / f;
    if (zeros[c] == 1 && f == 0.0) return nonzero[c];
    return 0.0;
  }
  bool operator==(const FactorProduct& o) const {
    return (nonzero == o.nonzero).all() && (zeros == o.zeros).all() && emitted == o.emitted;
  }
};

struct RecordVisitor {
  FactorProduct* product;
  void operator()(const PathFactor& f) const {
    product->multiply(f.value);
    if (f.kind == FactorKind::Emitter) product->emitted = true;
  }
};

/// Replays a path and scatters `adjoint * d(contribution)` into the tile buffer.
struct ReplayVisitor {
  const FactorProduct* recorded;
  Spectrum adjoint;
  TileGradient* out;
  FactorProduct replayed;

  void operator()(const PathFactor& f) {
    replayed.multiply(f.value);
    if (f.kind == FactorKind::Emitter) replayed.emitted = true;
    if (f.kind == FactorKind::Roulette) return;

    Spectrum w;
    for (int c = 0; c < 3; ++c) w[c] = adjoint[c] * recorded->others(c, f.value[c]) * f.derivative;

    if (f.kind == FactorKind::Emitter) {
      out->d_light += w;
      return;
    }
    if (f.stencil == nullptr || !f.stencil->inside) return;
    if (f.kind == FactorKind::Phase) {
      const double s = w.sum();
      if (s == 0.0) return;
      for (int n = 0; n < 8; ++n)
        if (f.stencil->weight[n] != 0.0) out->voxel(f.stencil->voxel[n])[6] += s * f.stencil->weight[n];
      return;
    }
    if ((w == 0.0).all()) return;
    const int slot = f.kind == FactorKind::Scatter ? 3 : 0;
    for (int n = 0; n < 8; ++n) {
      const double sw = f.stencil->weight[n];
      if (sw == 0.0) continue;
      double* acc = out->voxel(f.stencil->voxel[n]);
      for (int c = 0; c < 3; ++c) acc[slot + c] += w[c] * sw;
    }
  }
};

}  // namespace detail

/// Path-replay gradient for an arbitrary pixel adjoint. `adjoint_of(x, y, I)`
/// returns d loss / d pixel given the pass-1 estimate I of pixel (x, y).
/// The rendered image is written to `rendered` when non-null.
template <class AdjointFn>
GradientSet grad_volpath_with(const Scene& scene, const Camera& cam, int spp, const RenderKey& key,
                              AdjointFn&& adjoint_of, Image* rendered = nullptr) {
  require(spp >= 1, "spp must be >= 1");
  const TraceContext ctx(scene, scene, cam);
  const auto tiles = make_tiles(cam.width, cam.height);
  const std::size_t voxels = scene.medium.voxel_count();
  std::vector<detail::TileGradient> partial(tiles.size(), detail::TileGradient(voxels));
  Image img(cam.width, cam.height);
  img.spp = spp;

  parallel_for(tiles.size(), [&](std::size_t ti) {
    const Tile& tile = tiles[ti];
    detail::TileGradient& acc = partial[ti];
    std::vector<detail::FactorProduct> products(spp);
    for (int y = tile.y0; y < tile.y1; ++y)
      for (int x = tile.x0; x < tile.x1; ++x) {
        const auto pixel = static_cast<std::uint64_t>(y) * cam.width + x;
        Spectrum sum = Spectrum::Zero();
        for (int s = 0; s < spp; ++s) {
          products[s] = {};
          Sampler rng = key.stream(pixel, s);
          const auto [ox, oy] = pixel_offset(scene, rng);
          sum += trace_path(ctx, generate_ray(cam, x + ox, y + oy), rng, detail::RecordVisitor{&products[s]});
        }
        const Spectrum value = sum / spp;
        check_pixel(value, x, y);
        img.set(x, y, value);

        const Spectrum adjoint = adjoint_of(x, y, value) / static_cast<double>(spp);
        if ((adjoint == 0.0).all()) continue;
        for (int s = 0; s < spp; ++s) {
          if (!products[s].emitted) continue;  // zero contribution, zero derivative
          Sampler rng = key.stream(pixel, s);
          const auto [ox, oy] = pixel_offset(scene, rng);
          detail::ReplayVisitor replay{&products[s], adjoint, &acc, {}};
          trace_path(ctx, generate_ray(cam, x + ox, y + oy), rng, replay);
          if (!(replay.replayed == products[s]))
            throw Error("path replay diverged at pixel (" + std::to_string(x) + ", " + std::to_string(y) +
                        "), sample " + std::to_string(s));
        }
      }
  });

  GradientSet grad(scene.medium.shape());
  for (const auto& p : partial) p.merge_into(grad);
  require(grad.finite(), "non-finite gradient");
  grad.rebuild_touched();
  if (rendered) *rendered = std::move(img);
  return grad;
}

/// Gradient of sum(adjoint * rendered) for a fixed adjoint image.
inline GradientSet grad_volpath_adjoint(const Scene& scene, const Camera& cam, const Image& adjoint, int spp,
                                        const RenderKey& key) {
  require(adjoint.width == cam.width && adjoint.height == cam.height, "adjoint image size must match the camera");
  return grad_volpath_with(scene, cam, spp, key, [&](int x, int y, const Spectrum&) { return adjoint.get(x, y); });
}

struct LossGradient {
  double loss = 0.0;
  GradientSet gradient;
  Image rendered;
};

/// MSE loss (display scale) of a fixed-seed render against `reference`, with
/// its gradient.
inline LossGradient grad_volpath(const Scene& scene, const Camera& cam, const Image& reference, int spp,
                                 const RenderKey& key) {
  require(reference.width == cam.width && reference.height == cam.height,
          "reference image size must match the camera window");
  LossGradient out;
  const std::size_t values = 3 * reference.pixel_count();
  out.gradient = grad_volpath_with(
      scene, cam, spp, key,
      [&](int x, int y, const Spectrum& value) { return mse_loss_adjoint(value, reference.get(x, y), values); },
      &out.rendered);
  out.loss = mse_loss(out.rendered, reference);
  return out;
}

/// Exact gradient of the ray-marched attenuation-only model for a given
/// residual (d loss / d pixel) image. Albedo and g gradients are zero.
inline GradientSet grad_absorption_only(const Scene& scene, const Camera& cam, const Image& residual) {
  require(residual.width == cam.width && residual.height == cam.height, "residual image size must match the camera");
  const LightSource light = scene.light.resolved(cam);
  const auto tiles = make_tiles(cam.width, cam.height);
  std::vector<detail::TileGradient> partial(tiles.size(), detail::TileGradient(scene.medium.voxel_count()));

  parallel_for(tiles.size(), [&](std::size_t ti) {
    const Tile& tile = tiles[ti];
    detail::TileGradient& acc = partial[ti];
    for (int y = tile.y0; y < tile.y1; ++y)
      for (int x = tile.x0; x < tile.x1; ++x) {
        const Spectrum r = residual.get(x, y);
        if ((r == 0.0).all()) continue;
        const Ray ray = generate_ray(cam, x + 0.5, y + 0.5);
        const auto hit = light_hit(light, ray);
        if (!hit) continue;
        const auto seg = scene.boundary.intersect(ray.origin, ray.direction, 0.0, hit->t);
        Spectrum tau = Spectrum::Zero();
        if (seg) tau = optical_depth(scene, ray, seg->t0, seg->t1);
        const Spectrum transmittance = (-tau).exp();
        const Spectrum intensity = light.radiance * transmittance;
        acc.d_light += r * transmittance;
        if (!seg) continue;
        const MarchSteps m = medium_march(scene, ray, seg->t0, seg->t1);
        const Spectrum w = -r * intensity * m.dt;
        for (long s = 0; s < m.count; ++s) {
          const MediumPoint mp = query_extinction(scene, ray.at(m.t0 + (s + 0.5) * m.dt));
          if (!mp.stencil.inside) continue;
          for (int k = 0; k < 8; ++k) {
            if (mp.stencil.weight[k] == 0.0) continue;
            double* a = acc.voxel(mp.stencil.voxel[k]);
            for (int c = 0; c < 3; ++c) a[c] += w[c] * mp.stencil.weight[k];
          }
        }
      }
  });

  GradientSet grad(scene.medium.shape());
  for (const auto& p : partial) p.merge_into(grad);
  grad.rebuild_touched();
  return grad;
}

}  // namespace vito
