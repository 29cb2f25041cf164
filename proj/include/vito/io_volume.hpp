#pragma once

// VITO1 volume files.
//
//   offset  size  field
//   0       5     magic "VITO1"
//   5       4     u32 kind (0 = medium, 1 = emissive)
//   9       12    u32 X, Y, Z
//   21      4     u32 channels (7 for medium, 4 for emissive)
//   25      48    f64 bounds lo.x lo.y lo.z hi.x hi.y hi.z
//   73      ...   f32 data, channel-major, z fastest
//
// All numbers little-endian. Medium channels: sigma_t r,g,b, albedo r,g,b, g.
// Emissive channels: density, color r,g,b.

#include <cstring>
#include <fstream>
#include <string>
#include <variant>
#include <vector>

#include "vito/volume.hpp"

namespace vito {

enum class VolumeKind : std::uint32_t { Medium = 0, Emissive = 1 };

inline constexpr char kVolumeMagic[5] = {'V', 'I', 'T', 'O', '1'};
inline constexpr std::size_t kVolumeHeaderSize = 73;

struct VolumeHeader {
  VolumeKind kind = VolumeKind::Medium;
  std::uint32_t nx = 0;
  std::uint32_t ny = 0;
  std::uint32_t nz = 0;
  std::uint32_t channels = 0;
  Box bounds;

  std::uint64_t voxel_count() const { return std::uint64_t{nx} * ny * nz; }
  std::uint64_t payload_bytes() const { return voxel_count() * channels * 4; }
};

namespace detail {

inline void put_u32(std::string& s, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>(v >> (8 * i)));
}
inline void put_u64(std::string& s, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) s.push_back(static_cast<char>(v >> (8 * i)));
}
inline void put_f64(std::string& s, double d) {
  std::uint64_t u;
  std::memcpy(&u, &d, 8);
  put_u64(s, u);
}
inline void put_f32(std::string& s, float f) {
  std::uint32_t u;
  std::memcpy(&u, &f, 4);
  put_u32(s, u);
}
inline std::uint32_t get_u32(const unsigned char* p) {
  return p[0] | (p[1] << 8) | (p[2] << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
inline std::uint64_t get_u64(const unsigned char* p) {
  return std::uint64_t{get_u32(p)} | (std::uint64_t{get_u32(p + 4)} << 32);
}
inline double get_f64(const unsigned char* p) {
  const std::uint64_t u = get_u64(p);
  double d;
  std::memcpy(&d, &u, 8);
  return d;
}
inline float get_f32(const unsigned char* p) {
  const std::uint32_t u = get_u32(p);
  float f;
  std::memcpy(&f, &u, 4);
  return f;
}

inline std::string encode_header(const VolumeHeader& h) {
  std::string s(kVolumeMagic, 5);
  put_u32(s, static_cast<std::uint32_t>(h.kind));
  put_u32(s, h.nx);
  put_u32(s, h.ny);
  put_u32(s, h.nz);
  put_u32(s, h.channels);
  for (int a = 0; a < 3; ++a) put_f64(s, h.bounds.lo[a]);
  for (int a = 0; a < 3; ++a) put_f64(s, h.bounds.hi[a]);
  return s;
}

}  // namespace detail

/// Validates and decodes the fixed-size header; never reads past `size`.
inline VolumeHeader parse_volume_header(const unsigned char* data, std::size_t size) {
  if (size < kVolumeHeaderSize) throw Error("volume: truncated header (" + std::to_string(size) + " bytes)");
  if (std::memcmp(data, kVolumeMagic, 5) != 0) throw Error("volume: bad magic (expected VITO1)");
  VolumeHeader h;
  const std::uint32_t kind = detail::get_u32(data + 5);
  if (kind > 1) throw Error("volume: unknown kind " + std::to_string(kind));
  h.kind = static_cast<VolumeKind>(kind);
  h.nx = detail::get_u32(data + 9);
  h.ny = detail::get_u32(data + 13);
  h.nz = detail::get_u32(data + 17);
  h.channels = detail::get_u32(data + 21);
  for (int a = 0; a < 3; ++a) h.bounds.lo[a] = detail::get_f64(data + 25 + 8 * a);
  for (int a = 0; a < 3; ++a) h.bounds.hi[a] = detail::get_f64(data + 49 + 8 * a);
  if (h.nx == 0 || h.ny == 0 || h.nz == 0 || h.nx > (1u << 16) || h.ny > (1u << 16) || h.nz > (1u << 16))
    throw Error("volume: dimensions must lie in [1, 65536]");
  const std::uint32_t expected = h.kind == VolumeKind::Medium ? 7 : 4;
  if (h.channels != expected)
    throw Error("volume: kind " + std::to_string(kind) + " needs " + std::to_string(expected) + " channels, got " +
                std::to_string(h.channels));
  if (!h.bounds.valid()) throw Error("volume: bounds must be a finite non-degenerate box");
  return h;
}

inline std::string encode_volume(const MediumGrid& grid) {
  const auto& s = grid.shape();
  VolumeHeader h{VolumeKind::Medium, static_cast<std::uint32_t>(s.nx), static_cast<std::uint32_t>(s.ny),
                 static_cast<std::uint32_t>(s.nz), 7, s.bounds};
  std::string out = detail::encode_header(h);
  out.reserve(out.size() + h.payload_bytes());
  for (float f : grid.sigma_t()) detail::put_f32(out, f);
  for (float f : grid.albedo()) detail::put_f32(out, f);
  for (float f : grid.g()) detail::put_f32(out, f);
  return out;
}

inline std::string encode_volume(const EmissiveGrid& grid) {
  const auto& s = grid.shape();
  VolumeHeader h{VolumeKind::Emissive, static_cast<std::uint32_t>(s.nx), static_cast<std::uint32_t>(s.ny),
                 static_cast<std::uint32_t>(s.nz), 4, s.bounds};
  std::string out = detail::encode_header(h);
  out.reserve(out.size() + h.payload_bytes());
  for (float f : grid.density()) detail::put_f32(out, f);
  for (float f : grid.color()) detail::put_f32(out, f);
  return out;
}

using Volume = std::variant<MediumGrid, EmissiveGrid>;

/// Decodes a volume and checks the stored-value invariants.
inline Volume decode_volume(const std::string& bytes) {
  const auto* data = reinterpret_cast<const unsigned char*>(bytes.data());
  const VolumeHeader h = parse_volume_header(data, bytes.size());
  if (bytes.size() - kVolumeHeaderSize != h.payload_bytes())
    throw Error("volume: payload is " + std::to_string(bytes.size() - kVolumeHeaderSize) + " bytes, header declares " +
                std::to_string(h.payload_bytes()));
  const unsigned char* p = data + kVolumeHeaderSize;
  auto fill = [&p](std::span<float> dst) {
    for (float& f : dst) {
      f = detail::get_f32(p);
      p += 4;
    }
  };
  const int nx = static_cast<int>(h.nx);
  const int ny = static_cast<int>(h.ny);
  const int nz = static_cast<int>(h.nz);
  if (h.kind == VolumeKind::Medium) {
    MediumGrid grid(nx, ny, nz, h.bounds);
    fill(grid.sigma_t());
    fill(grid.albedo());
    fill(grid.g());
    validate(grid);
    return grid;
  }
  EmissiveGrid grid(nx, ny, nz, h.bounds);
  fill(grid.density());
  fill(grid.color());
  validate(grid);
  return grid;
}

namespace detail {
inline void write_bytes(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed: " + path);
}
inline std::string read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}
}  // namespace detail

inline void write_volume(const std::string& path, const MediumGrid& grid) { detail::write_bytes(path, encode_volume(grid)); }
inline void write_volume(const std::string& path, const EmissiveGrid& grid) { detail::write_bytes(path, encode_volume(grid)); }

inline Volume read_volume(const std::string& path) {
  try {
    return decode_volume(detail::read_bytes(path));
  } catch (const Error& e) {
    throw Error(path + ": " + e.what());
  }
}

inline MediumGrid read_medium(const std::string& path) {
  Volume v = read_volume(path);
  if (auto* m = std::get_if<MediumGrid>(&v)) return std::move(*m);
  throw Error(path + ": expected a medium volume, found an emissive one");
}

inline EmissiveGrid read_emissive(const std::string& path) {
  Volume v = read_volume(path);
  if (auto* e = std::get_if<EmissiveGrid>(&v)) return std::move(*e);
  throw Error(path + ": expected an emissive volume, found a medium one");
}

}  // namespace vito
