#pragma once

#include <cmath>

namespace vito {

/// sRGB transfer curve, linear -> encoded, both on [0, 1]. Values outside
/// the unit interval follow the analytic continuation of each segment.
inline double srgb_encode(double x) {
  if (x <= 0.0031308) return 12.92 * x;
  return 1.055 * std::pow(x, 1.0 / 2.4) - 0.055;
}

inline double srgb_encode_derivative(double x) {
  if (x <= 0.0031308) return 12.92;
  return 1.055 / 2.4 * std::pow(x, 1.0 / 2.4 - 1.0);
}

inline double srgb_decode(double v) {
  if (v <= 0.04045) return v / 12.92;
  return std::pow((v + 0.055) / 1.055, 2.4);
}

}  // namespace vito
