#pragma once

// Henyey-Greenstein phase function.
//
// The density is evaluated with a "+2g cos" denominator:
//
//   p(cos) = (1 - g^2) / (4 pi (1 + g^2 + 2 g cos)^(3/2))
//
// where cos is measured between the reversed incoming propagation direction
// (pointing back toward the previous vertex) and the outgoing direction, see
// phase_cosine(). Under this convention g > 0 is forward scattering. Measuring
// the angle against the propagation direction instead flips the sign of g.

#include "vito/common.hpp"

namespace vito {

/// True: cos = dot(-incoming, outgoing). False would be dot(incoming, outgoing).
inline constexpr bool kPhaseCosineUsesReversedIncoming = true;

inline double phase_cosine(const Vec3& incoming, const Vec3& outgoing) {
  const double c = incoming.dot(outgoing);
  return kPhaseCosineUsesReversedIncoming ? -c : c;
}

namespace detail {

inline double hg_unchecked(double g, double cos_theta) {
  const double denom = 1.0 + g * g + 2.0 * g * cos_theta;
  return kInvFourPi * (1.0 - g * g) / (denom * std::sqrt(denom));
}

inline void check_anisotropy(double g) {
  require(std::isfinite(g) && std::abs(g) < 1.0, "Henyey-Greenstein g must lie in (-1, 1)");
}

}  // namespace detail

inline double eval_hg(double g, double cos_theta) {
  detail::check_anisotropy(g);
  return detail::hg_unchecked(g, cos_theta);
}

/// d p / d g at fixed cos.
inline double eval_hg_dg(double g, double cos_theta) {
  const double denom = 1.0 + g * g + 2.0 * g * cos_theta;
  const double p = kInvFourPi * (1.0 - g * g) / (denom * std::sqrt(denom));
  return p * (-2.0 * g / (1.0 - g * g) - 3.0 * (g + cos_theta) / denom);
}

/// d log p / d g at fixed cos.
inline double dlog_hg_dg(double g, double cos_theta) {
  const double denom = 1.0 + g * g + 2.0 * g * cos_theta;
  return -2.0 * g / (1.0 - g * g) - 3.0 * (g + cos_theta) / denom;
}

struct PhaseSample {
  Vec3 direction;
  double pdf = 0.0;
  double cos_theta = 0.0;
};

/// Orthonormal basis (s, t) perpendicular to the unit vector n.
inline void coordinate_frame(const Vec3& n, Vec3& s, Vec3& t) {
  const double sign = std::copysign(1.0, n.z());
  const double a = -1.0 / (sign + n.z());
  const double b = n.x() * n.y() * a;
  s = Vec3(1.0 + sign * n.x() * n.x() * a, sign * b, -sign * n.x());
  t = Vec3(b, sign + n.y() * n.y() * a, -n.y());
}

namespace detail {

/// Closed-form inverse of the cumulative distribution of cos.
inline double sample_hg_cosine(double g, double u) {
  if (std::abs(g) < 1e-6) return 1.0 - 2.0 * u;
  // With g' = -g the density has the classical (1 + g'^2 - 2 g' cos) form.
  const double gp = -g;
  const double sq = (1.0 - gp * gp) / (1.0 - gp + 2.0 * gp * u);
  return std::clamp((1.0 + gp * gp - sq * sq) / (2.0 * gp), -1.0, 1.0);
}

inline PhaseSample sample_hg_unchecked(double g, const Vec3& incoming, double u1, double u2) {
  PhaseSample ps;
  ps.cos_theta = sample_hg_cosine(g, u1);
  const double sin_theta = std::sqrt(std::max(0.0, 1.0 - ps.cos_theta * ps.cos_theta));
  const double phi = 2.0 * kPi * u2;
  const Vec3 axis = kPhaseCosineUsesReversedIncoming ? Vec3(-incoming) : incoming;
  Vec3 s;
  Vec3 t;
  coordinate_frame(axis, s, t);
  ps.direction = (sin_theta * std::cos(phi) * s + sin_theta * std::sin(phi) * t + ps.cos_theta * axis).normalized();
  ps.pdf = hg_unchecked(g, ps.cos_theta);
  return ps;
}

}  // namespace detail

/// Importance-samples an outgoing direction for a ray travelling along
/// `incoming`. The reported pdf is eval_hg at the realized cosine.
inline PhaseSample sample_hg(double g, const Vec3& incoming, double u1, double u2) {
  detail::check_anisotropy(g);
  return detail::sample_hg_unchecked(g, incoming, u1, u2);
}

}  // namespace vito
