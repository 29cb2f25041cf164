#pragma once

#include <cstdint>

namespace vito {

namespace detail {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

inline constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace detail

/// Uniform sample stream. The state is a pure function of the key it was
/// created from, so a stream can be replayed exactly.
class Sampler {
 public:
  explicit constexpr Sampler(std::uint64_t state) : state_(state) {}

  /// Uniform double in [0, 1).
  double next() {
    state_ += detail::kGolden;
    return static_cast<double>(detail::mix64(state_) >> 11) * 0x1.0p-53;
  }

 private:
  std::uint64_t state_;
};

/// Identifies one family of sample streams: a render of one view during one
/// optimization pass. Streams are keyed on (pixel, sample) below it and never
/// on the worker that happens to execute them.
struct RenderKey {
  std::uint64_t seed = 0;
  std::uint64_t view = 0;
  std::uint64_t pass = 0;

  constexpr Sampler stream(std::uint64_t pixel, std::uint64_t sample) const {
    std::uint64_t h = detail::mix64(seed + detail::kGolden);
    h = detail::mix64(h ^ (view + 0x632BE59BD9B4E019ull));
    h = detail::mix64(h ^ (pass + 0x8CB92BA72F3D8DD7ull));
    h = detail::mix64(h ^ (pixel + 0xD6E8FEB86659FD93ull));
    h = detail::mix64(h ^ (sample + 0xA0761D6478BD642Full));
    return Sampler(h);
  }
};

}  // namespace vito
