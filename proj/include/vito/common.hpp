#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>

namespace vito {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
/// Linear RGB quantity (radiance, coefficients, throughput).
using Spectrum = Eigen::Array3d;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kInvFourPi = 1.0 / (4.0 * kPi);
inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Thrown for every contract violation and malformed input in the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw Error(message);
}

inline bool all_finite(const Spectrum& s) { return s.isFinite().all(); }

struct Interval {
  double t0;
  double t1;
};

/// Axis-aligned box in world space.
struct Box {
  Vec3 lo = Vec3::Zero();
  Vec3 hi = Vec3::Zero();

  Vec3 extent() const { return hi - lo; }
  Vec3 center() const { return 0.5 * (lo + hi); }

  bool contains(const Vec3& p) const {
    return (p.array() >= lo.array()).all() && (p.array() <= hi.array()).all();
  }
  bool contains(const Box& other) const {
    return (other.lo.array() >= lo.array()).all() && (other.hi.array() <= hi.array()).all();
  }
  bool valid() const { return (hi.array() > lo.array()).all() && lo.allFinite() && hi.allFinite(); }

  /// Slab intersection clipped to [t_min, t_max]; empty overlap yields nullopt.
  std::optional<Interval> intersect(const Vec3& origin, const Vec3& direction, double t_min,
                                    double t_max) const {
    double t0 = t_min;
    double t1 = t_max;
    for (int a = 0; a < 3; ++a) {
      const double inv = 1.0 / direction[a];
      double near = (lo[a] - origin[a]) * inv;
      double far = (hi[a] - origin[a]) * inv;
      if (std::isnan(near) || std::isnan(far)) {
        // Ray parallel to the slab and lying on its plane.
        if (origin[a] < lo[a] || origin[a] > hi[a]) return std::nullopt;
        continue;
      }
      if (near > far) std::swap(near, far);
      t0 = std::max(t0, near);
      t1 = std::min(t1, far);
      if (t0 > t1) return std::nullopt;
    }
    return Interval{t0, t1};
  }
};

}  // namespace vito
