#pragma once

#include <memory>
#include <string>
#include <vector>

#include "meshpose/camera.hpp"
#include "meshpose/mesh.hpp"
#include "meshpose/render.hpp"
#include "meshpose/tensor.hpp"

namespace meshpose {

// Landmark table version: 21 joints assigned by fixed latitude/longitude
// bands of the ring/segment grid (1 root + 5 strips of 4), with the scale
// bone spanning joints 9 and 10 (middle strip, first two bands).
inline constexpr const char* kLandmarkTableVersion = "landmarks-v1";
inline constexpr int kJointCount = 21;
inline constexpr int kRootJoint = 0;
inline constexpr int kScaleBoneA = 9;   // MCP of the middle strip
inline constexpr int kScaleBoneB = 10;  // PIP of the middle strip

// Template radius in scene length units (millimetre-equivalent).
inline constexpr double kTemplateRadius = 80.0;

struct TemplateMesh {
  std::shared_ptr<const MeshTopology> topology;
  Tensor rest_vertices;  // N x 3, centered at the origin
  std::vector<std::vector<int>> landmarks;  // kJointCount disjoint vertex sets
  std::string kind;
  int rings = 0, segments = 0;
  int64_t requested_vertices = 0;  // n_target as asked; vertex_count() is what was achievable

  int64_t vertex_count() const { return topology->vertex_count(); }
  // centroids of the landmark sets (J x 3) for a given vertex tensor
  Tensor joints_of(const Tensor& vertices) const;
};

// kind: "sphere-grid" (default) or "capsule". The ring/segment grid uses 18
// segments; rings are chosen to get as close to n_target as possible and the
// achieved count is reported through requested/actual fields.
TemplateMesh make_template(const std::string& kind, int64_t n_target);

struct DeformationParams {
  struct Bump {
    double center[3];
    double sigma;
    double amp[3];
  };
  std::vector<Bump> bumps;      // at most 8, total |amp| bounded by 0.3 * radius
  double rot_axis[3];
  double rot_angle;
  double root_target[3];        // where the root landmark centroid goes
  uint64_t seed;
};

DeformationParams sample_deformation(uint64_t seed, const CameraIntrinsics& cam);

// apply bumps + rigid pose; returns the N x 3 posed vertices
Tensor apply_deformation(const TemplateMesh& tmpl, const DeformationParams& params);

struct Sample {
  int64_t index = 0;
  uint64_t seed = 0;
  std::vector<float> image;     // H x W x 3, row-major HWC
  std::vector<float> heatmaps;  // J x 64 x 64
  Tensor mesh3d;                // N x 3 camera frame
  Tensor mesh2d;                // N x 2 normalized image coords
  Tensor uvd;                   // N x 3 (u, v, root-relative scale-normalized depth)
  Tensor joints3d;              // J x 3 camera frame
  DepthMap depth;               // 32 x 32, rendered from mesh3d
  CameraIntrinsics camera;
  RootScale root_scale;
  double z_near = 0, z_far = 0;  // depth normalization range shared by all maps
  int resample_attempts = 0;

  Tensor image_tensor() const;     // H x W x 3 doubles
  Tensor heatmap_tensor() const;   // J x 64 x 64 doubles
};

struct GenParams {
  CameraIntrinsics camera;
  double z_near = 400.0, z_far = 1600.0;
  int depth_res = 32;
  int heatmap_size = 64;
  double heatmap_sigma = 4.0;

  static GenParams defaults();
};

Sample generate_sample(const TemplateMesh& tmpl, uint64_t seed, const GenParams& gp);

}  // namespace meshpose
