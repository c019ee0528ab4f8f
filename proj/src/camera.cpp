#include "meshpose/camera.hpp"

#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace meshpose {

void CameraIntrinsics::validate() const {
  if (fx <= 0 || fy <= 0) throw std::invalid_argument("camera: focal lengths must be positive");
  if (width <= 0 || height <= 0) throw std::invalid_argument("camera: image size must be positive");
  if (cx < 0 || cx > width || cy < 0 || cy > height)
    throw std::invalid_argument("camera: principal point outside image bounds");
}

void RootScale::validate() const {
  if (root_depth <= 0 || scale <= 0)
    throw std::invalid_argument("root_scale: root_depth and scale must be positive");
}

CameraIntrinsics camera_from_json_text(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  const char* keys[] = {"fx", "fy", "cx", "cy", "width", "height"};
  for (const char* k : keys) {
    if (!j.contains(k)) throw std::invalid_argument(std::string("camera json: missing key ") + k);
  }
  CameraIntrinsics cam;
  cam.fx = j["fx"].get<double>();
  cam.fy = j["fy"].get<double>();
  cam.cx = j["cx"].get<double>();
  cam.cy = j["cy"].get<double>();
  cam.width = j["width"].get<int>();
  cam.height = j["height"].get<int>();
  cam.validate();
  return cam;
}

std::string camera_to_json_text(const CameraIntrinsics& cam) {
  nlohmann::json j;
  j["fx"] = cam.fx;
  j["fy"] = cam.fy;
  j["cx"] = cam.cx;
  j["cy"] = cam.cy;
  j["width"] = cam.width;
  j["height"] = cam.height;
  return j.dump(2) + "\n";
}

CameraIntrinsics load_camera_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open camera file " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return camera_from_json_text(text);
}

void save_camera_json(const CameraIntrinsics& cam, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write camera file " + path);
  out << camera_to_json_text(cam);
}

UvdConversion uvd_to_xyz(const Tensor& uvd, const CameraIntrinsics& cam, const RootScale& rs) {
  if (uvd.shape().size() != 2 || uvd.shape()[1] != 3)
    throw std::invalid_argument("uvd_to_xyz: expected Nx3, got " + shape_str(uvd.shape()));
  cam.validate();
  rs.validate();
  const int64_t n = uvd.shape()[0];
  UvdConversion res;
  res.xyz = Tensor({n, 3});
  res.nonpositive_depth = 0;
  double* out = res.xyz.mut();
  const double* in = uvd.data();
  for (int64_t i = 0; i < n; ++i) {
    double u = in[i * 3 + 0], v = in[i * 3 + 1], d = in[i * 3 + 2];
    double z = d * rs.scale + rs.root_depth;
    if (z <= 0) res.nonpositive_depth++;
    out[i * 3 + 0] = (u * cam.width - cam.cx) * z / cam.fx;
    out[i * 3 + 1] = (v * cam.height - cam.cy) * z / cam.fy;
    out[i * 3 + 2] = z;
  }
  return res;
}

Tensor xyz_to_uvd(const Tensor& xyz, const CameraIntrinsics& cam, const RootScale& rs) {
  if (xyz.shape().size() != 2 || xyz.shape()[1] != 3)
    throw std::invalid_argument("xyz_to_uvd: expected Nx3, got " + shape_str(xyz.shape()));
  cam.validate();
  rs.validate();
  const int64_t n = xyz.shape()[0];
  Tensor uvd({n, 3});
  double* out = uvd.mut();
  const double* in = xyz.data();
  for (int64_t i = 0; i < n; ++i) {
    double x = in[i * 3 + 0], y = in[i * 3 + 1], z = in[i * 3 + 2];
    if (z <= 0) throw std::invalid_argument("xyz_to_uvd: vertex depth must be positive");
    out[i * 3 + 0] = (cam.fx * x / z + cam.cx) / cam.width;
    out[i * 3 + 1] = (cam.fy * y / z + cam.cy) / cam.height;
    out[i * 3 + 2] = (z - rs.root_depth) / rs.scale;
  }
  return uvd;
}

}  // namespace meshpose
