#pragma once

// COLMAP text model ingestion (cameras.txt, images.txt).
//
// COLMAP stores world-to-camera poses: x_cam = R x_world + t. Camera stores
// the inverse (camera-to-world rotation and the camera center), so
// rotation = R^T and center = -R^T t.

#include <istream>
#include <sstream>
#include <string>
#include <vector>

#include "vito/sensor.hpp"

namespace vito {

struct ColmapCamera {
  int id = 0;
  std::string model;
  int width = 0;
  int height = 0;
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
};

struct ColmapImage {
  int id = 0;
  Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();  ///< world-to-camera, normalized
  Vec3 translation = Vec3::Zero();                              ///< world-to-camera
  int camera_id = 0;
  std::string name;

  Mat3 rotation_matrix() const { return rotation.toRotationMatrix(); }
};

namespace detail {

inline std::vector<std::string> split_fields(const std::string& line) {
  std::istringstream ss(line);
  std::vector<std::string> out;
  for (std::string t; ss >> t;) out.push_back(t);
  return out;
}

inline bool blank_or_comment(const std::string& line) {
  const auto p = line.find_first_not_of(" \t\r");
  return p == std::string::npos || line[p] == '#';
}

inline double parse_double(const std::string& s, const std::string& where) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || !std::isfinite(v)) throw Error(where + ": '" + s + "' is not a finite number");
  return v;
}

inline int parse_int(const std::string& s, const std::string& where) {
  std::size_t used = 0;
  long v = 0;
  try {
    v = std::stol(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max())
    throw Error(where + ": '" + s + "' is not an integer");
  return static_cast<int>(v);
}

}  // namespace detail

/// Parses cameras.txt. Only PINHOLE and SIMPLE_PINHOLE are supported.
inline std::vector<ColmapCamera> parse_colmap_cameras(std::istream& in) {
  std::vector<ColmapCamera> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::blank_or_comment(line)) continue;
    const std::string where = "cameras.txt line " + std::to_string(line_no);
    const auto f = detail::split_fields(line);
    if (f.size() < 4) throw Error(where + ": expected CAMERA_ID MODEL WIDTH HEIGHT PARAMS...");
    ColmapCamera cam;
    cam.id = detail::parse_int(f[0], where);
    cam.model = f[1];
    cam.width = detail::parse_int(f[2], where);
    cam.height = detail::parse_int(f[3], where);
    if (cam.width <= 0 || cam.height <= 0) throw Error(where + ": image size must be positive");
    std::vector<double> p;
    for (std::size_t i = 4; i < f.size(); ++i) p.push_back(detail::parse_double(f[i], where));
    if (cam.model == "PINHOLE") {
      if (p.size() != 4) throw Error(where + ": PINHOLE expects 4 parameters (fx fy cx cy)");
      cam.fx = p[0];
      cam.fy = p[1];
      cam.cx = p[2];
      cam.cy = p[3];
    } else if (cam.model == "SIMPLE_PINHOLE") {
      if (p.size() != 3) throw Error(where + ": SIMPLE_PINHOLE expects 3 parameters (f cx cy)");
      cam.fx = cam.fy = p[0];
      cam.cx = p[1];
      cam.cy = p[2];
    } else {
      throw Error(where + ": unsupported camera model " + cam.model);
    }
    if (!(cam.fx > 0.0 && cam.fy > 0.0)) throw Error(where + ": focal length must be > 0");
    for (const auto& c : out)
      if (c.id == cam.id) throw Error(where + ": duplicate camera id " + std::to_string(cam.id));
    out.push_back(cam);
  }
  return out;
}

inline std::vector<ColmapCamera> parse_colmap_cameras(const std::string& text) {
  std::istringstream in(text);
  return parse_colmap_cameras(in);
}

/// Parses images.txt: each image takes two lines, the pose line
/// "IMAGE_ID QW QX QY QZ TX TY TZ CAMERA_ID NAME" and a 2D point line (which
/// may be empty and is ignored).
inline std::vector<ColmapImage> parse_colmap_images(std::istream& in) {
  std::vector<ColmapImage> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::blank_or_comment(line)) continue;
    const std::string where = "images.txt line " + std::to_string(line_no);
    const auto f = detail::split_fields(line);
    if (f.size() < 10) throw Error(where + ": expected IMAGE_ID QW QX QY QZ TX TY TZ CAMERA_ID NAME");
    ColmapImage img;
    img.id = detail::parse_int(f[0], where);
    double q[4];
    for (int i = 0; i < 4; ++i) q[i] = detail::parse_double(f[1 + i], where);
    for (int i = 0; i < 3; ++i) img.translation[i] = detail::parse_double(f[5 + i], where);
    img.camera_id = detail::parse_int(f[8], where);
    // Names may contain spaces; everything after CAMERA_ID belongs to it.
    std::istringstream ss(line);
    std::string skip;
    for (int i = 0; i < 9; ++i) ss >> skip;
    std::getline(ss >> std::ws, img.name);
    while (!img.name.empty() && (img.name.back() == '\r' || img.name.back() == ' ')) img.name.pop_back();
    const double norm = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
    if (!(norm > 1e-12) || !std::isfinite(norm)) throw Error(where + ": quaternion cannot be normalized");
    img.rotation = Eigen::Quaterniond(q[0] / norm, q[1] / norm, q[2] / norm, q[3] / norm);
    for (const auto& o : out)
      if (o.id == img.id) throw Error(where + ": duplicate image id " + std::to_string(img.id));
    out.push_back(img);
    if (!std::getline(in, line)) break;
    ++line_no;
    // Points line: (X, Y, POINT3D_ID) triples; content unused but checked.
    const auto pts = detail::split_fields(line);
    const std::string pwhere = "images.txt line " + std::to_string(line_no);
    if (pts.size() % 3 != 0) throw Error(pwhere + ": 2D points must come in (X, Y, POINT3D_ID) triples");
    for (const auto& t : pts) detail::parse_double(t, pwhere);
  }
  return out;
}

inline std::vector<ColmapImage> parse_colmap_images(const std::string& text) {
  std::istringstream in(text);
  return parse_colmap_images(in);
}

struct CropWindow {
  int x = 0;
  int y = 0;
  int width = 0;   ///< 0: full sensor width
  int height = 0;  ///< 0: full sensor height
};

/// Camera for one registered image. `metric_scale` multiplies the camera
/// center (structure-from-motion units -> meters).
inline Camera assemble_camera(const ColmapCamera& intr, const ColmapImage& pose, double metric_scale,
                              const CropWindow& crop = {}) {
  require(metric_scale > 0.0 && std::isfinite(metric_scale), "metric scale must be > 0");
  require(intr.id == pose.camera_id, "image " + pose.name + " refers to a different camera id");
  Camera cam;
  cam.sensor_width = intr.width;
  cam.sensor_height = intr.height;
  cam.crop_x = crop.x;
  cam.crop_y = crop.y;
  cam.width = crop.width > 0 ? crop.width : intr.width - crop.x;
  cam.height = crop.height > 0 ? crop.height : intr.height - crop.y;
  cam.fx = intr.fx;
  cam.fy = intr.fy;
  cam.cx = intr.cx;
  cam.cy = intr.cy;
  const Mat3 r = pose.rotation_matrix();
  cam.rotation = r.transpose();
  cam.translation = -metric_scale * (r.transpose() * pose.translation);
  cam.validate();
  return cam;
}

}  // namespace vito
