#pragma once

// Forward rendering of the radiative transfer equation.
//
// Free flights are sampled by delta tracking under one scalar majorant shared
// by the three channels. Every sampling decision (tentative collision
// distances, real-vs-null, scatter-vs-absorb, phase directions, roulette) is
// made from a *guide* scene, while the returned throughput is evaluated with
// per-channel ratio weights from the *evaluation* scene. Normally both are the
// same scene and the weights reduce to the usual spectral tracking weights.
// Keeping them apart makes a fixed-seed estimate a smooth function of the
// evaluation parameters, which is what the adjoint differentiates.

#include <vector>

#include "vito/color.hpp"
#include "vito/image.hpp"
#include "vito/parallel.hpp"
#include "vito/phase.hpp"
#include "vito/rng.hpp"
#include "vito/sensor.hpp"
#include "vito/volume.hpp"

namespace vito {

/// Removes the specimen on the side where dot(normal, x) > offset.
struct ClipPlane {
  Vec3 normal = Vec3::UnitZ();
  double offset = 0.0;

  bool clips(const Vec3& p) const { return normal.dot(p) > offset; }
};

enum class OutputTransform {
  Linear,
  /// 8-bit tonemapped values are inverted (255 - v) per channel.
  InvertedTonemap,
};

struct Scene {
  MediumGrid medium;
  /// Region in which light interacts with media; contains medium bounds.
  Box boundary;
  /// Fills boundary minus the specimen box when present.
  std::optional<HomogeneousMedium> immersion;
  LightSource light;
  std::vector<Camera> cameras;
  int max_depth = 64;
  int rr_depth = 8;
  std::uint64_t seed = 0;
  std::vector<ClipPlane> clip_planes;
  /// Lower bound on the tracking majorant (m^-1). A positive floor keeps
  /// null collisions (and thus extinction gradients) alive in empty media.
  double majorant_floor = 0.0;
  /// Jitter primary rays inside the pixel footprint.
  bool jitter = true;
  OutputTransform output = OutputTransform::Linear;

  void validate() const {
    medium.shape().validate();
    require(boundary.valid(), "scene boundary must be a valid box");
    require(boundary.contains(medium.shape().bounds), "scene boundary must contain the medium bounds");
    require(max_depth >= 1, "max_depth must be >= 1");
    require(rr_depth >= 0, "rr_depth must be >= 0");
    require(majorant_floor >= 0.0 && std::isfinite(majorant_floor), "majorant_floor must be finite and >= 0");
    if (immersion) immersion->validate();
    light.validate();
    for (const auto& cam : cameras) cam.validate();
    for (const auto& p : clip_planes)
      require(std::abs(p.normal.norm() - 1.0) < 1e-9, "clip plane normals must be unit length");
  }
};

// ---------------------------------------------------------------------------
// Coefficient queries

/// Extinction at a point plus what is needed to look up the remaining
/// coefficients and to route gradients back to voxels.
struct MediumPoint {
  Stencil stencil;  ///< inside == true iff the point samples the voxel grid
  Spectrum sigma_t = Spectrum::Zero();
  bool in_immersion = false;
};

inline bool clipped(const Scene& scene, const Vec3& x) {
  for (const auto& p : scene.clip_planes)
    if (p.clips(x)) return true;
  return false;
}

inline MediumPoint query_extinction(const Scene& scene, const Vec3& x) {
  MediumPoint mp;
  const auto& shape = scene.medium.shape();
  if (shape.bounds.contains(x) && !clipped(scene, x)) {
    mp.stencil = make_stencil(shape, x);
    mp.sigma_t = scene.medium.sigma_t_at(mp.stencil);
    return mp;
  }
  if (scene.immersion && scene.boundary.contains(x)) {
    mp.in_immersion = true;
    mp.sigma_t = scene.immersion->sigma_t;
  }
  return mp;
}

inline Spectrum query_albedo(const Scene& scene, const MediumPoint& mp) {
  if (mp.stencil.inside) return scene.medium.albedo_at(mp.stencil);
  if (mp.in_immersion) return scene.immersion->albedo;
  return Spectrum::Zero();
}

inline double query_g(const Scene& scene, const MediumPoint& mp) {
  if (mp.stencil.inside) return scene.medium.g_at(mp.stencil);
  if (mp.in_immersion) return scene.immersion->g;
  return 0.0;
}

/// Scalar majorant shared by all channels.
inline double tracking_majorant(const Scene& scene) {
  double m = majorant(scene.medium).maxCoeff();
  if (scene.immersion) m = std::max(m, scene.immersion->sigma_t.maxCoeff());
  return std::max(m, scene.majorant_floor);
}

/// Region in which tracking has to run: the whole boundary when an
/// attenuating immersion medium fills it, otherwise only the medium bounds
/// (extinction is zero everywhere else, so skipping it leaves every estimator
/// unchanged).
inline const Box& tracking_box(const Scene& scene) {
  if (scene.immersion && scene.immersion->sigma_t.maxCoeff() > 0.0) return scene.boundary;
  return scene.medium.shape().bounds;
}

/// Midpoint quadrature of the medium part of a ray, [t0, t1] clipped to the
/// medium bounds: step count and positions shared with the gradient of the
/// attenuation-only model.
struct MarchSteps {
  double t0 = 0.0;
  double dt = 0.0;
  long count = 0;
};

inline MarchSteps medium_march(const Scene& scene, const Ray& ray, double t0, double t1) {
  const auto seg = scene.medium.shape().bounds.intersect(ray.origin, ray.direction, t0, t1);
  if (!seg || !(seg->t1 > seg->t0)) return {};
  const double h = 0.5 * scene.medium.shape().min_voxel_edge();
  const double len = seg->t1 - seg->t0;
  const auto n = static_cast<long>(std::max(1.0, std::ceil(len / h)));
  return {seg->t0, len / static_cast<double>(n), n};
}

/// Optical depth along the ray over [t0, t1]: immersion medium exactly, the
/// voxel grid by midpoint quadrature with steps of half the smallest voxel
/// edge.
inline Spectrum optical_depth(const Scene& scene, const Ray& ray, double t0, double t1) {
  if (!(t1 > t0)) return Spectrum::Zero();
  const MarchSteps m = medium_march(scene, ray, t0, t1);
  Spectrum tau = Spectrum::Zero();
  for (long s = 0; s < m.count; ++s) tau += query_extinction(scene, ray.at(m.t0 + (s + 0.5) * m.dt)).sigma_t * m.dt;
  if (scene.immersion) {
    if (const auto w = scene.boundary.intersect(ray.origin, ray.direction, t0, t1)) {
      const double outside = (w->t1 - w->t0) - static_cast<double>(m.count) * m.dt;
      tau += scene.immersion->sigma_t * std::max(0.0, outside);
    }
  }
  return tau;
}

// ---------------------------------------------------------------------------
// Transmittance and free-flight sampling

/// Ratio-tracking estimate of exp(-integral sigma_t) over [segment.t0, segment.t1].
inline Spectrum transmittance_ratio(const Scene& scene, const Ray& ray, const Interval& segment, Sampler& rng) {
  const double sigma_bar = tracking_majorant(scene);
  Spectrum tr = Spectrum::Ones();
  if (sigma_bar <= 0.0) return tr;
  double t = segment.t0;
  for (;;) {
    t -= std::log1p(-rng.next()) / sigma_bar;
    if (t >= segment.t1) return tr;
    tr *= 1.0 - query_extinction(scene, ray.at(t)).sigma_t / sigma_bar;
  }
}

struct FreeFlight {
  double t;
  /// Product of the null-collision and real-collision weights per channel.
  Spectrum weight;
};

/// Delta tracking through the scene boundary. nullopt means the ray left the
/// boundary without a real collision.
inline std::optional<FreeFlight> sample_free_flight(const Scene& scene, const Ray& ray, Sampler& rng) {
  const double sigma_bar = tracking_majorant(scene);
  if (sigma_bar <= 0.0) return std::nullopt;
  const auto seg = tracking_box(scene).intersect(ray.origin, ray.direction, ray.t_near, ray.t_far);
  if (!seg) return std::nullopt;
  Spectrum w = Spectrum::Ones();
  double t = seg->t0;
  for (;;) {
    t -= std::log1p(-rng.next()) / sigma_bar;
    if (t >= seg->t1) return std::nullopt;
    const Spectrum s = query_extinction(scene, ray.at(t)).sigma_t;
    const double p_real = (w * s).sum() / (sigma_bar * w.sum());
    if (rng.next() < p_real) {
      w *= s / (sigma_bar * p_real);
      return FreeFlight{t, w};
    }
    w *= (sigma_bar - s) / (sigma_bar * (1.0 - p_real));
  }
}

// ---------------------------------------------------------------------------
// Path integration

enum class FactorKind { Null, Real, Scatter, Phase, Roulette, Emitter };

/// One multiplicative factor of a path's contribution. `derivative` is the
/// derivative of `value` with respect to the coefficient interpolated at the
/// event (sigma_t for Null/Real, albedo for Scatter, g for Phase, light
/// radiance for Emitter); `stencil` maps it to voxels.
struct PathFactor {
  FactorKind kind;
  Spectrum value;
  double derivative = 0.0;
  const Stencil* stencil = nullptr;
};

struct NoVisitor {
  void operator()(const PathFactor&) const {}
};

struct TraceContext {
  const Scene* eval = nullptr;
  const Scene* guide = nullptr;
  LightSource light;  ///< world space; radiance from the evaluation scene
  double sigma_bar = 0.0;

  TraceContext(const Scene& eval_scene, const Scene& guide_scene, const Camera& cam)
      : eval(&eval_scene), guide(&guide_scene), light(guide_scene.light.resolved(cam)) {
    light.radiance = eval_scene.light.radiance;
    sigma_bar = tracking_majorant(guide_scene);
  }
};

/// Traces one camera path and returns its contribution. `visit` sees every
/// factor whose product (with the emitter radiance last) forms the result.
template <class Visitor>
Spectrum trace_path(const TraceContext& ctx, Ray ray, Sampler& rng, Visitor&& visit) {
  const Scene& eval = *ctx.eval;
  const Scene& guide = *ctx.guide;
  const bool shared = ctx.eval == ctx.guide;
  const double sigma_bar = ctx.sigma_bar;

  Spectrum beta = Spectrum::Ones();
  Spectrum beta_guide = Spectrum::Ones();
  int depth = 0;
  for (;;) {
    const auto hit = light_hit(ctx.light, ray);
    const double t_light = hit ? hit->t : kInfinity;
    const auto seg = tracking_box(guide).intersect(ray.origin, ray.direction, ray.t_near, ray.t_far);
    bool scattered = false;
    if (seg && sigma_bar > 0.0) {
      const double t_end = std::min(seg->t1, t_light);
      double t = seg->t0;
      for (;;) {
        t -= std::log1p(-rng.next()) / sigma_bar;
        if (t >= t_end) break;
        const Vec3 x = ray.at(t);
        const MediumPoint gp = query_extinction(guide, x);
        const MediumPoint ep = shared ? gp : query_extinction(eval, x);
        const double p_real = (beta_guide * gp.sigma_t).sum() / (sigma_bar * beta_guide.sum());
        if (!std::isfinite(p_real)) return Spectrum::Constant(std::numeric_limits<double>::quiet_NaN());
        if (rng.next() >= p_real) {
          const double d = 1.0 / (sigma_bar * (1.0 - p_real));
          const Spectrum f = (sigma_bar - ep.sigma_t) * d;
          beta *= f;
          beta_guide *= (sigma_bar - gp.sigma_t) * d;
          visit(PathFactor{FactorKind::Null, f, -d, &ep.stencil});
          continue;
        }
        {
          const double d = 1.0 / (sigma_bar * p_real);
          const Spectrum f = ep.sigma_t * d;
          beta *= f;
          beta_guide *= gp.sigma_t * d;
          visit(PathFactor{FactorKind::Real, f, d, &ep.stencil});
        }
        const Spectrum albedo_guide = query_albedo(guide, gp);
        const Spectrum albedo_eval = shared ? albedo_guide : query_albedo(eval, ep);
        const double p_scatter = (beta_guide * albedo_guide).sum() / beta_guide.sum();
        if (!(rng.next() < p_scatter)) return Spectrum::Zero();  // absorbed
        {
          const double d = 1.0 / p_scatter;
          const Spectrum f = albedo_eval * d;
          beta *= f;
          beta_guide *= albedo_guide * d;
          visit(PathFactor{FactorKind::Scatter, f, d, &ep.stencil});
        }
        const double g_guide = query_g(guide, gp);
        const double g_eval = shared ? g_guide : query_g(eval, ep);
        const double u1 = rng.next();
        const double u2 = rng.next();
        const PhaseSample ps = detail::sample_hg_unchecked(g_guide, ray.direction, u1, u2);
        {
          const double w = shared ? 1.0 : detail::hg_unchecked(g_eval, ps.cos_theta) / ps.pdf;
          beta *= w;
          visit(PathFactor{FactorKind::Phase, Spectrum::Constant(w), eval_hg_dg(g_eval, ps.cos_theta) / ps.pdf,
                           &ep.stencil});
        }
        ray = Ray{x, ps.direction, 0.0, kInfinity};
        scattered = true;
        break;
      }
    }
    if (!scattered) {
      if (!hit) return Spectrum::Zero();
      visit(PathFactor{FactorKind::Emitter, ctx.light.radiance, 1.0, nullptr});
      return beta * ctx.light.radiance;
    }
    if (++depth >= guide.max_depth) return Spectrum::Zero();
    if (depth >= guide.rr_depth) {
      const double q = std::min(1.0, beta_guide.maxCoeff());
      if (!(rng.next() < q)) return Spectrum::Zero();
      beta /= q;
      beta_guide /= q;
      visit(PathFactor{FactorKind::Roulette, Spectrum::Constant(1.0 / q), 0.0, nullptr});
    }
  }
}

inline void check_pixel(const Spectrum& s, int x, int y) {
  if (!all_finite(s))
    throw Error("non-finite radiance at pixel (" + std::to_string(x) + ", " + std::to_string(y) + ")");
}

/// Sub-pixel position of sample `s` of a pixel.
inline std::pair<double, double> pixel_offset(const Scene& scene, Sampler& rng) {
  if (!scene.jitter) return {0.5, 0.5};
  const double u = rng.next();
  const double v = rng.next();
  return {u, v};
}

/// Monte Carlo volumetric path tracing of one view. Samples of pixel p use
/// the streams key.stream(p, s). `guide`, when given, supplies all sampling
/// decisions while `scene` supplies the evaluated coefficients.
inline Image render_volpath(const Scene& scene, const Camera& cam, int spp, const RenderKey& key,
                            const Scene* guide = nullptr) {
  require(spp >= 1, "spp must be >= 1");
  const Scene& g = guide ? *guide : scene;
  const TraceContext ctx(scene, g, cam);
  Image img(cam.width, cam.height);
  img.spp = spp;
  const auto tiles = make_tiles(cam.width, cam.height);
  parallel_for(tiles.size(), [&](std::size_t ti) {
    const Tile& tile = tiles[ti];
    for (int y = tile.y0; y < tile.y1; ++y)
      for (int x = tile.x0; x < tile.x1; ++x) {
        const auto pixel = static_cast<std::uint64_t>(y) * cam.width + x;
        Spectrum sum = Spectrum::Zero();
        for (int s = 0; s < spp; ++s) {
          Sampler rng = key.stream(pixel, s);
          const auto [ox, oy] = pixel_offset(g, rng);
          sum += trace_path(ctx, generate_ray(cam, x + ox, y + oy), rng, NoVisitor{});
        }
        const Spectrum value = sum / spp;
        check_pixel(value, x, y);
        img.set(x, y, value);
      }
  });
  return img;
}

/// Deterministic attenuation-only image: light radiance times
/// exp(-optical depth) along the pixel-center ray, zero where the ray misses
/// the light.
inline Image render_absorption_only(const Scene& scene, const Camera& cam) {
  const LightSource light = scene.light.resolved(cam);
  Image img(cam.width, cam.height);
  const auto tiles = make_tiles(cam.width, cam.height);
  parallel_for(tiles.size(), [&](std::size_t ti) {
    const Tile& tile = tiles[ti];
    for (int y = tile.y0; y < tile.y1; ++y)
      for (int x = tile.x0; x < tile.x1; ++x) {
        const Ray ray = generate_ray(cam, x + 0.5, y + 0.5);
        const auto hit = light_hit(light, ray);
        if (!hit) continue;
        Spectrum tau = Spectrum::Zero();
        if (const auto seg = scene.boundary.intersect(ray.origin, ray.direction, 0.0, hit->t))
          tau = optical_depth(scene, ray, seg->t0, seg->t1);
        img.set(x, y, light.radiance * (-tau).exp());
      }
  });
  return img;
}

/// Quadrature of the emission-absorption integral with piecewise constant
/// density and color per step over the ray's overlap with the grid box.
inline Spectrum integrate_emissive(const EmissiveGrid& grid, const Ray& ray, int n_steps) {
  const auto seg = grid.shape().bounds.intersect(ray.origin, ray.direction, ray.t_near, ray.t_far);
  if (!seg || !(seg->t1 > seg->t0)) return Spectrum::Zero();
  const double dt = (seg->t1 - seg->t0) / n_steps;
  Spectrum color = Spectrum::Zero();
  double transmittance = 1.0;
  for (int s = 0; s < n_steps; ++s) {
    const Stencil st = make_stencil(grid.shape(), ray.at(seg->t0 + (s + 0.5) * dt));
    if (!st.inside) continue;
    const double step_t = std::exp(-grid.density_at(st) * dt);
    color += transmittance * (1.0 - step_t) * grid.color_at(st);
    transmittance *= step_t;
  }
  return color;
}

inline Image render_emissive(const EmissiveGrid& grid, const Camera& cam, int n_steps) {
  require(n_steps >= 2, "render_emissive needs n_steps >= 2");
  Image img(cam.width, cam.height);
  const auto tiles = make_tiles(cam.width, cam.height);
  parallel_for(tiles.size(), [&](std::size_t ti) {
    const Tile& tile = tiles[ti];
    for (int y = tile.y0; y < tile.y1; ++y)
      for (int x = tile.x0; x < tile.x1; ++x)
        img.set(x, y, integrate_emissive(grid, generate_ray(cam, x + 0.5, y + 0.5), n_steps));
  });
  return img;
}

/// Linear value -> 8-bit sRGB code (clamped, rounded to nearest).
inline std::uint8_t tonemap_8bit(double linear) {
  const double e = std::clamp(srgb_encode(std::clamp(linear, 0.0, 1.0)), 0.0, 1.0);
  return static_cast<std::uint8_t>(std::lround(255.0 * e));
}

/// Applies the scene's output transform to a rendered linear image. The
/// inverted transform works on 8-bit codes, so writing the result as PNG
/// yields exactly 255 - v of the untransformed image.
inline Image present(const Image& img, OutputTransform transform) {
  if (transform == OutputTransform::Linear) return img;
  Image out = img;
  for (double& v : out.pixels) v = srgb_decode((255 - tonemap_8bit(v)) / 255.0);
  return out;
}

}  // namespace vito
