#pragma once

#include <string>

#include "meshpose/tensor.hpp"

namespace meshpose {

// Pinhole intrinsics in pixels of the full-resolution image.
struct CameraIntrinsics {
  double fx = 0, fy = 0;
  double cx = 0, cy = 0;
  int width = 0, height = 0;

  void validate() const;
};

// Written/read as a JSON document with exactly the keys
// fx, fy, cx, cy, width, height.
CameraIntrinsics load_camera_json(const std::string& path);
void save_camera_json(const CameraIntrinsics& cam, const std::string& path);
CameraIntrinsics camera_from_json_text(const std::string& text);
std::string camera_to_json_text(const CameraIntrinsics& cam);

// Test-time globals: absolute depth of the root joint and the global scale
// (length of the designated reference bone), both in scene length units.
struct RootScale {
  double root_depth = 0;
  double scale = 0;

  void validate() const;
};

struct UvdConversion {
  Tensor xyz;             // N x 3 camera-frame coordinates
  int nonpositive_depth;  // vertices that landed at z <= 0 (flagged, not rejected)
};

// (u, v, d) -> camera frame: z = d*scale + root_depth,
// x = (u*width - cx) * z / fx, y = (v*height - cy) * z / fy.
UvdConversion uvd_to_xyz(const Tensor& uvd, const CameraIntrinsics& cam, const RootScale& rs);

// inverse of uvd_to_xyz; z must be positive for every vertex
Tensor xyz_to_uvd(const Tensor& xyz, const CameraIntrinsics& cam, const RootScale& rs);

}  // namespace meshpose
