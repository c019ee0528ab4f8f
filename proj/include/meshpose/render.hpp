#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <vector>

#include "meshpose/camera.hpp"
#include "meshpose/tensor.hpp"

namespace meshpose {

// Normalized depth raster. Values live in [0,1]; 1.0 encodes background, so
// the foreground mask is value < 1.
struct DepthMap {
  int width = 0, height = 0;
  std::vector<double> values;  // row-major, height x width

  double at(int y, int x) const { return values[size_t(y) * width + x]; }
  bool foreground(int y, int x) const { return at(y, x) < 1.0; }
};

// Fixed inputs of a depth rasterization: triangle list, camera, raster
// resolution and the normalization range shared by reference and rendered
// maps.
struct RenderContext {
  std::vector<std::array<int, 3>> faces;
  CameraIntrinsics cam;
  int res_w = 32, res_h = 32;
  double z_near = 0.1, z_far = 2.0;

  void validate(int64_t vertex_count) const;
};

// Per-pixel record of the forward pass used by the backward pass: the index
// of the visible triangle (-1 for background) plus the tally of z-culled
// faces.
struct RenderSave {
  std::vector<int32_t> winner;
  int culled_faces = 0;
};

struct RenderResult {
  DepthMap map;
  std::shared_ptr<const RenderSave> save;
};

// z-buffer rasterization of camera-frame vertices (N x 3). Pixel centers sit
// at (i+0.5, j+0.5) in raster coordinates; coverage uses a half-open
// top-left rule; the visible triangle's depth is interpolated
// perspective-correctly; faces with any vertex at z <= 0 are culled.
RenderResult render_depth(const Tensor& xyz, const RenderContext& ctx);

// Accumulates d(sum_px adjoint*pixel)/d(vertex) into grad_acc (N x 3 buffer).
// Coverage is treated as locally constant: only the visible triangle of each
// pixel receives gradient, through the barycentric weights and the
// projection.
void render_depth_backward(const Tensor& xyz, const RenderContext& ctx, const RenderSave& save,
                           const double* pixel_adjoint, double* grad_acc);

struct RenderGradCheckReport {
  bool skipped = false;
  std::string reason;
  double max_rel_err = 0.0;
  bool ok = false;
};

// Finite-difference check of the renderer's vertex gradients on the sum of
// rendered pixels. Configurations where a pixel center lies within eps (in
// raster units) of a visible triangle edge are skipped with a reason.
RenderGradCheckReport render_gradcheck(const Tensor& xyz, const RenderContext& ctx,
                                       double h = 1e-6, double tol = 1e-3, double eps = 1e-3);

}  // namespace meshpose
