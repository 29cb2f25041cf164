#pragma once

// Pinhole cameras and the rectangular area light.
//
// Camera frame: +x right, +y down, +z along the optical axis (COLMAP
// convention). `rotation` maps camera-frame directions to world space and
// `translation` is the camera center in world space.

#include <array>
#include <optional>
#include <utility>

#include "vito/common.hpp"

namespace vito {

struct Ray {
  Vec3 origin = Vec3::Zero();
  Vec3 direction = Vec3::UnitZ();
  double t_near = 0.0;
  double t_far = kInfinity;

  Vec3 at(double t) const { return origin + t * direction; }
};

struct Camera {
  // Crop window size in pixels.
  int width = 0;
  int height = 0;
  // Full sensor size; the crop window must lie inside it.
  int sensor_width = 0;
  int sensor_height = 0;
  int crop_x = 0;
  int crop_y = 0;
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 center() const { return translation; }
  Vec3 optical_axis() const { return rotation.col(2); }

  void validate() const {
    require(width > 0 && height > 0, "camera window must be non-empty");
    require(fx > 0.0 && fy > 0.0 && std::isfinite(fx) && std::isfinite(fy), "camera focal lengths must be > 0");
    require(crop_x >= 0 && crop_y >= 0 && crop_x + width <= sensor_width && crop_y + height <= sensor_height,
            "crop window must lie within the sensor");
    require((rotation * rotation.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-9 &&
                rotation.determinant() > 0.0,
            "camera rotation must be a proper orthonormal matrix");
    require(translation.allFinite(), "camera translation must be finite");
  }
};

/// Builds a camera whose full sensor equals the crop window.
inline Camera make_camera(int width, int height, double fx, double fy, double cx, double cy,
                          const Mat3& rotation = Mat3::Identity(), const Vec3& translation = Vec3::Zero()) {
  Camera cam;
  cam.width = cam.sensor_width = width;
  cam.height = cam.sensor_height = height;
  cam.fx = fx;
  cam.fy = fy;
  cam.cx = cx;
  cam.cy = cy;
  cam.rotation = rotation;
  cam.translation = translation;
  return cam;
}

/// Camera at `eye` looking at `target`; `up` fixes the roll (image y points
/// away from it).
inline Camera look_at(const Vec3& eye, const Vec3& target, const Vec3& up, int width, int height,
                      double vertical_fov_deg) {
  const Vec3 forward = (target - eye).normalized();
  Vec3 right = forward.cross(up);
  require(right.norm() > 1e-12, "look_at: view direction parallel to up vector");
  right.normalize();
  const Vec3 down = forward.cross(right);
  Mat3 r;
  r.col(0) = right;
  r.col(1) = down;
  r.col(2) = forward;
  const double f = 0.5 * height / std::tan(0.5 * vertical_fov_deg * kPi / 180.0);
  return make_camera(width, height, f, f, 0.5 * width, 0.5 * height, r, eye);
}

/// Ray through continuous window coordinates (px, py); pixel (i, j) covers
/// [i, i+1) x [j, j+1), so its center is (i + 0.5, j + 0.5).
inline Ray generate_ray(const Camera& cam, double px, double py) {
  if (!(px >= 0.0 && px <= cam.width && py >= 0.0 && py <= cam.height))
    throw Error("pixel (" + std::to_string(px) + ", " + std::to_string(py) + ") outside the crop window");
  const double u = px + cam.crop_x;
  const double v = py + cam.crop_y;
  const Vec3 d_cam((u - cam.cx) / cam.fx, (v - cam.cy) / cam.fy, 1.0);
  Ray ray;
  ray.origin = cam.translation;
  ray.direction = (cam.rotation * d_cam).normalized();
  return ray;
}

/// Window coordinates of a world-space direction seen from the camera center.
inline std::pair<double, double> project_direction(const Camera& cam, const Vec3& world_dir) {
  const Vec3 d = cam.rotation.transpose() * world_dir;
  return {cam.fx * d.x() / d.z() + cam.cx - cam.crop_x, cam.fy * d.y() / d.z() + cam.cy - cam.crop_y};
}

enum class LightFrame {
  World,
  /// Corners are given in the frame of whichever camera is rendering; the
  /// light orbits with the camera.
  Camera,
};

/// Uniform, two-sided quad emitter.
struct LightSource {
  std::array<Vec3, 4> corners{};
  Spectrum radiance = Spectrum::Ones();
  LightFrame frame = LightFrame::World;

  Vec3 normal() const { return (corners[1] - corners[0]).cross(corners[3] - corners[0]).normalized(); }

  void validate() const {
    require(all_finite(radiance) && (radiance >= 0.0).all(), "light radiance must be finite and >= 0");
    const Vec3 n = (corners[1] - corners[0]).cross(corners[3] - corners[0]);
    require(n.norm() > 0.0, "light quad is degenerate");
    const double scale = std::max({(corners[1] - corners[0]).norm(), (corners[3] - corners[0]).norm(), 1.0});
    require(std::abs(n.normalized().dot(corners[2] - corners[0])) <= 1e-9 * scale, "light corners must be coplanar");
  }

  /// World-space copy for rendering through `cam`.
  LightSource resolved(const Camera& cam) const {
    if (frame == LightFrame::World) return *this;
    LightSource out = *this;
    out.frame = LightFrame::World;
    for (auto& c : out.corners) c = cam.rotation * c + cam.translation;
    return out;
  }
};

/// Axis-aligned-in-its-plane rectangle with the given center, unit normal and
/// half extents along two in-plane axes derived from `u_hint`.
inline LightSource make_quad_light(const Vec3& center, const Vec3& normal, const Vec3& u_hint, double half_u,
                                   double half_v, const Spectrum& radiance, LightFrame frame = LightFrame::World) {
  const Vec3 n = normal.normalized();
  Vec3 u = (u_hint - u_hint.dot(n) * n);
  require(u.norm() > 1e-12, "make_quad_light: u_hint parallel to normal");
  u.normalize();
  const Vec3 v = n.cross(u);
  LightSource l;
  l.corners = {center - half_u * u - half_v * v, center + half_u * u - half_v * v, center + half_u * u + half_v * v,
               center - half_u * u + half_v * v};
  l.radiance = radiance;
  l.frame = frame;
  return l;
}

struct LightHit {
  double t;
  Spectrum radiance;
};

/// Intersection with a world-space light quad within (t_near, t_far).
inline std::optional<LightHit> light_hit(const LightSource& light, const Ray& ray) {
  const auto& c = light.corners;
  const Vec3 n = (c[1] - c[0]).cross(c[3] - c[0]);
  const double denom = n.dot(ray.direction);
  if (std::abs(denom) < 1e-14 * n.norm()) return std::nullopt;
  const double t = n.dot(c[0] - ray.origin) / denom;
  if (!(t > ray.t_near && t < ray.t_far)) return std::nullopt;
  const Vec3 x = ray.at(t);
  int positive = 0;
  int negative = 0;
  for (int e = 0; e < 4; ++e) {
    const double s = (c[(e + 1) % 4] - c[e]).cross(x - c[e]).dot(n);
    positive += s > 0.0;
    negative += s < 0.0;
  }
  if (positive > 0 && negative > 0) return std::nullopt;
  return LightHit{t, light.radiance};
}

}  // namespace vito
