#pragma once

#include <vector>

#include "vito/common.hpp"

namespace vito {

/// Linear RGB image, row-major, pixel (0, 0) at the top left.
struct Image {
  int width = 0;
  int height = 0;
  int spp = 1;
  std::vector<double> pixels;

  Image() = default;
  Image(int w, int h, double fill = 0.0) : width(w), height(h), pixels(3 * static_cast<std::size_t>(w) * h, fill) {
    require(w > 0 && h > 0, "image dimensions must be positive");
  }

  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }

  Spectrum get(int x, int y) const {
    const std::size_t o = 3 * (static_cast<std::size_t>(y) * width + x);
    return {pixels[o], pixels[o + 1], pixels[o + 2]};
  }
  void set(int x, int y, const Spectrum& s) {
    const std::size_t o = 3 * (static_cast<std::size_t>(y) * width + x);
    pixels[o] = s[0];
    pixels[o + 1] = s[1];
    pixels[o + 2] = s[2];
  }

  bool same_size(const Image& o) const { return width == o.width && height == o.height; }
  bool operator==(const Image& o) const { return same_size(o) && pixels == o.pixels; }
};

}  // namespace vito
