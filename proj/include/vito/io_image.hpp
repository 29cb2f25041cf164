#pragma once

// Image files: 8-bit sRGB PNG and linear portable float maps (PFM).

#include <png.h>

#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "vito/color.hpp"
#include "vito/image.hpp"
#include "vito/transport.hpp"

namespace vito {

/// 8-bit code -> linear value.
inline double srgb_code_to_linear(std::uint8_t v) { return srgb_decode(v / 255.0); }

/// 8-bit RGB codes of an image, row-major.
inline std::vector<std::uint8_t> to_8bit(const Image& img) {
  std::vector<std::uint8_t> out(img.pixels.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = tonemap_8bit(img.pixels[i]);
  return out;
}

inline Image from_8bit(int width, int height, const std::vector<std::uint8_t>& codes) {
  Image img(width, height);
  require(codes.size() == img.pixels.size(), "8-bit buffer size does not match the image");
  for (std::size_t i = 0; i < codes.size(); ++i) img.pixels[i] = srgb_code_to_linear(codes[i]);
  return img;
}

/// Decodes a PNG held in memory into 8-bit RGB codes.
inline std::vector<std::uint8_t> decode_png(const std::vector<std::uint8_t>& bytes, int& width, int& height) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size()))
    throw Error(std::string("PNG: ") + image.message);
  image.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buf.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw Error("PNG: " + msg);
  }
  width = static_cast<int>(image.width);
  height = static_cast<int>(image.height);
  return buf;
}

inline std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

/// Reads an 8-bit PNG and linearizes it with the sRGB curve.
inline Image read_png(const std::string& path) {
  int w = 0;
  int h = 0;
  std::vector<std::uint8_t> codes;
  try {
    codes = decode_png(read_file_bytes(path), w, h);
  } catch (const Error& e) {
    throw Error(path + ": " + e.what());
  }
  return from_8bit(w, h, codes);
}

inline void write_png_codes(const std::string& path, int width, int height, const std::vector<std::uint8_t>& codes) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(width);
  image.height = static_cast<png_uint_32>(height);
  image.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&image, path.c_str(), 0, codes.data(), 0, nullptr))
    throw Error("cannot write PNG " + path + ": " + image.message);
}

/// Writes the sRGB-encoded, clamped, 8-bit version of a linear image.
inline void write_png(const std::string& path, const Image& img) { write_png_codes(path, img.width, img.height, to_8bit(img)); }

/// PFM bytes: "PF\n<w> <h>\n-1.0\n" then little-endian float32 RGB rows,
/// bottom row first.
inline std::string encode_pfm(const Image& img) {
  std::ostringstream os(std::ios::binary);
  os << "PF\n" << img.width << ' ' << img.height << "\n-1.0\n";
  for (int y = img.height - 1; y >= 0; --y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c) {
        const float f = static_cast<float>(img.pixels[3 * (static_cast<std::size_t>(y) * img.width + x) + c]);
        std::uint32_t u;
        std::memcpy(&u, &f, 4);
        const char b[4] = {static_cast<char>(u), static_cast<char>(u >> 8), static_cast<char>(u >> 16),
                           static_cast<char>(u >> 24)};
        os.write(b, 4);
      }
  return os.str();
}

inline Image decode_pfm(const std::string& bytes) {
  std::size_t pos = 0;
  auto token = [&]() {
    while (pos < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    const std::size_t start = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    if (start == pos) throw Error("PFM: truncated header");
    return bytes.substr(start, pos - start);
  };
  if (token() != "PF") throw Error("PFM: only 3-channel 'PF' files are supported");
  long w = 0;
  long h = 0;
  double scale = 0.0;
  try {
    w = std::stol(token());
    h = std::stol(token());
    scale = std::stod(token());
  } catch (const std::logic_error&) {
    throw Error("PFM: malformed header");
  }
  if (w <= 0 || h <= 0 || w > (1 << 20) || h > (1 << 20)) throw Error("PFM: invalid dimensions");
  if (!(scale < 0.0)) throw Error("PFM: only little-endian (negative scale) files are supported");
  ++pos;  // single whitespace after the scale
  const std::size_t need = static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 12;
  if (pos > bytes.size() || bytes.size() - pos < need) throw Error("PFM: truncated pixel data");
  Image img(static_cast<int>(w), static_cast<int>(h));
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + pos);
  for (long y = h - 1; y >= 0; --y)
    for (long x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c, p += 4) {
        const std::uint32_t u = p[0] | (p[1] << 8) | (p[2] << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
        float f;
        std::memcpy(&f, &u, 4);
        img.pixels[3 * (static_cast<std::size_t>(y) * w + x) + c] = f;
      }
  return img;
}

inline void write_pfm(const std::string& path, const Image& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  const std::string bytes = encode_pfm(img);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed: " + path);
}

inline Image read_pfm(const std::string& path) {
  const auto raw = read_file_bytes(path);
  try {
    return decode_pfm(std::string(raw.begin(), raw.end()));
  } catch (const Error& e) {
    throw Error(path + ": " + e.what());
  }
}

/// Linear float image (PFM). Values round to float32.
inline void write_image_float(const std::string& path, const Image& img) { write_pfm(path, img); }
inline Image read_image_float(const std::string& path) { return read_pfm(path); }

/// Reads .pfm as linear floats and anything else as 8-bit sRGB PNG.
inline Image read_image(const std::string& path) {
  if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".pfm") == 0) return read_pfm(path);
  return read_png(path);
}

inline void write_image(const std::string& path, const Image& img) {
  if (path.size() >= 4 && path.compare(path.size() - 4, 4, ".pfm") == 0)
    write_pfm(path, img);
  else
    write_png(path, img);
}

}  // namespace vito
