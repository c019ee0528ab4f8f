#pragma once

// Test-side oracles, independent of the library's implementation paths.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "meshpose/render.hpp"
#include "meshpose/tensor.hpp"

namespace meshpose::testutil {

// Brute-force per-pixel ray-cast z-buffer: every pixel tests every triangle
// (no bounding boxes, no incremental z-buffer) and keeps the nearest depth.
// Coverage and interpolation follow the renderer's documented conventions:
// half-open top-left rule on raster-space edge functions, perspective-correct
// inverse-depth interpolation, z<=0 culling, [z_near, z_far] normalization.
inline DepthMap raycast_depth_oracle(const Tensor& xyz, const RenderContext& ctx) {
  const int64_t n = xyz.shape()[0];
  const double* v = xyz.data();
  const double sx = double(ctx.res_w) / ctx.cam.width;
  const double sy = double(ctx.res_h) / ctx.cam.height;

  std::vector<double> px(static_cast<size_t>(n)), py(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    double z = v[i * 3 + 2];
    if (z > 0) {
      px[size_t(i)] = (ctx.cam.fx * v[i * 3 + 0] / z + ctx.cam.cx) * sx;
      py[size_t(i)] = (ctx.cam.fy * v[i * 3 + 1] / z + ctx.cam.cy) * sy;
    }
  }

  auto edge = [](double ax, double ay, double bx, double by, double qx, double qy) {
    return (bx - ax) * (qy - ay) - (by - ay) * (qx - ax);
  };
  auto tl = [](double ax, double ay, double bx, double by) {
    double dy = by - ay, dx = bx - ax;
    return dy < 0.0 || (dy == 0.0 && dx < 0.0);
  };

  DepthMap out;
  out.width = ctx.res_w;
  out.height = ctx.res_h;
  out.values.assign(size_t(ctx.res_w) * size_t(ctx.res_h), 1.0);

  for (int iy = 0; iy < ctx.res_h; ++iy) {
    for (int ix = 0; ix < ctx.res_w; ++ix) {
      const double qx = ix + 0.5, qy = iy + 0.5;
      double best = std::numeric_limits<double>::infinity();
      for (const auto& face : ctx.faces) {
        int i0 = face[0], i1 = face[1], i2 = face[2];
        double z0 = v[i0 * 3 + 2], z1 = v[i1 * 3 + 2], z2 = v[i2 * 3 + 2];
        if (z0 <= 0 || z1 <= 0 || z2 <= 0) continue;
        double ax = px[size_t(i0)], ay = py[size_t(i0)];
        double bx = px[size_t(i1)], by = py[size_t(i1)];
        double cx = px[size_t(i2)], cy = py[size_t(i2)];
        double area = edge(ax, ay, bx, by, cx, cy);
        if (area == 0.0) continue;
        if (area < 0.0) {
          std::swap(i1, i2);
          std::swap(bx, cx);
          std::swap(by, cy);
          std::swap(z1, z2);
        }
        double w0 = edge(bx, by, cx, cy, qx, qy);
        double w1 = edge(cx, cy, ax, ay, qx, qy);
        double w2 = edge(ax, ay, bx, by, qx, qy);
        bool in0 = w0 > 0.0 || (w0 == 0.0 && tl(bx, by, cx, cy));
        bool in1 = w1 > 0.0 || (w1 == 0.0 && tl(cx, cy, ax, ay));
        bool in2 = w2 > 0.0 || (w2 == 0.0 && tl(ax, ay, bx, by));
        if (!(in0 && in1 && in2)) continue;
        double wsum = w0 + w1 + w2;
        double invz = (w0 / z0 + w1 / z1 + w2 / z2) / wsum;
        double z = 1.0 / invz;
        if (z < best) best = z;
      }
      if (std::isfinite(best)) {
        double t = (best - ctx.z_near) / (ctx.z_far - ctx.z_near);
        out.values[size_t(iy) * size_t(ctx.res_w) + size_t(ix)] = std::clamp(t, 0.0, 1.0);
      }
    }
  }
  return out;
}

}  // namespace meshpose::testutil
