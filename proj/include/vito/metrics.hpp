#pragma once

// Image losses and quality metrics. All of them compare images on the 8-bit
// display scale: linear radiance is sRGB-encoded and multiplied by 255
// (without quantization or clamping).

#include <array>
#include <vector>

#include "vito/color.hpp"
#include "vito/image.hpp"

namespace vito {

inline constexpr double kDisplayScale = 255.0;

inline double display_value(double linear) { return kDisplayScale * srgb_encode(linear); }

inline double mse_loss(const Image& rendered, const Image& reference) {
  require(rendered.same_size(reference), "mse_loss: image dimensions differ");
  double sum = 0.0;
  for (std::size_t i = 0; i < rendered.pixels.size(); ++i) {
    const double d = display_value(rendered.pixels[i]) - display_value(reference.pixels[i]);
    sum += d * d;
  }
  return sum / static_cast<double>(rendered.pixels.size());
}

/// d mse_loss / d rendered for one pixel.
inline Spectrum mse_loss_adjoint(const Spectrum& rendered, const Spectrum& reference, std::size_t value_count) {
  Spectrum out;
  for (int c = 0; c < 3; ++c) {
    const double d = display_value(rendered[c]) - display_value(reference[c]);
    out[c] = 2.0 * d * kDisplayScale * srgb_encode_derivative(rendered[c]) / static_cast<double>(value_count);
  }
  return out;
}

inline double psnr(double mse) {
  require(mse > 0.0, "psnr: mse must be > 0");
  return 10.0 * std::log10(kDisplayScale * kDisplayScale / mse);
}

/// Mean structural similarity with an 11x11 Gaussian window (sigma 1.5),
/// evaluated at every fully contained window position and averaged over
/// the three channels.
inline double ssim(const Image& a, const Image& b) {
  require(a.same_size(b), "ssim: image dimensions differ");
  constexpr int kWin = 11;
  require(a.width >= kWin && a.height >= kWin, "ssim: images must be at least 11x11");
  constexpr double c1 = (0.01 * kDisplayScale) * (0.01 * kDisplayScale);
  constexpr double c2 = (0.03 * kDisplayScale) * (0.03 * kDisplayScale);

  std::array<double, kWin> kernel{};
  double ksum = 0.0;
  for (int i = 0; i < kWin; ++i) {
    const double x = i - kWin / 2;
    kernel[i] = std::exp(-x * x / (2.0 * 1.5 * 1.5));
    ksum += kernel[i];
  }
  for (double& k : kernel) k /= ksum;

  const int w = a.width;
  const int h = a.height;
  std::vector<double> va(static_cast<std::size_t>(w) * h);
  std::vector<double> vb(va.size());
  double total = 0.0;
  for (int c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < va.size(); ++i) {
      va[i] = display_value(a.pixels[3 * i + c]);
      vb[i] = display_value(b.pixels[3 * i + c]);
    }
    double channel_sum = 0.0;
    for (int y0 = 0; y0 + kWin <= h; ++y0)
      for (int x0 = 0; x0 + kWin <= w; ++x0) {
        double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
        for (int dy = 0; dy < kWin; ++dy)
          for (int dx = 0; dx < kWin; ++dx) {
            const double k = kernel[dy] * kernel[dx];
            const std::size_t i = static_cast<std::size_t>(y0 + dy) * w + x0 + dx;
            ma += k * va[i];
            mb += k * vb[i];
            saa += k * va[i] * va[i];
            sbb += k * vb[i] * vb[i];
            sab += k * va[i] * vb[i];
          }
        const double var_a = saa - ma * ma;
        const double var_b = sbb - mb * mb;
        const double cov = sab - ma * mb;
        channel_sum += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (var_a + var_b + c2));
      }
    total += channel_sum / static_cast<double>((w - kWin + 1) * (h - kWin + 1));
  }
  return total / 3.0;
}

}  // namespace vito
