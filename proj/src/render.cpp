#include "meshpose/render.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace meshpose {

namespace {

// z-component of (b - a) x (p - a); positive when p is left of a->b
inline double edge_fn(double ax, double ay, double bx, double by, double px, double py) {
  return (bx - ax) * (py - ay) - (by - ay) * (px - ax);
}

// half-open fill rule: zero-weight pixels belong to the triangle only on
// edges that point up, or left when horizontal
inline bool top_left(double ax, double ay, double bx, double by) {
  double dy = by - ay;
  double dx = bx - ax;
  return dy < 0.0 || (dy == 0.0 && dx < 0.0);
}

struct Projected {
  std::vector<double> px, py;  // raster coordinates
};

Projected project_all(const Tensor& xyz, const RenderContext& ctx) {
  const int64_t n = xyz.shape()[0];
  const double sx = double(ctx.res_w) / ctx.cam.width;
  const double sy = double(ctx.res_h) / ctx.cam.height;
  Projected pr;
  pr.px.resize(size_t(n));
  pr.py.resize(size_t(n));
  const double* v = xyz.data();
  for (int64_t i = 0; i < n; ++i) {
    double z = v[i * 3 + 2];
    if (z > 0) {
      pr.px[size_t(i)] = (ctx.cam.fx * v[i * 3 + 0] / z + ctx.cam.cx) * sx;
      pr.py[size_t(i)] = (ctx.cam.fy * v[i * 3 + 1] / z + ctx.cam.cy) * sy;
    } else {
      pr.px[size_t(i)] = 0;  // never read: faces touching this vertex are culled
      pr.py[size_t(i)] = 0;
    }
  }
  return pr;
}

}  // namespace

void RenderContext::validate(int64_t vertex_count) const {
  cam.validate();
  if (res_w <= 0 || res_h <= 0) throw std::invalid_argument("render: resolution must be positive");
  if (!(z_near > 0) || !(z_far > z_near))
    throw std::invalid_argument("render: need 0 < z_near < z_far");
  for (const auto& f : faces) {
    for (int i : f) {
      if (i < 0 || i >= vertex_count)
        throw std::invalid_argument("render: face index " + std::to_string(i) + " out of range for " +
                                    std::to_string(vertex_count) + " vertices");
    }
  }
}

RenderResult render_depth(const Tensor& xyz, const RenderContext& ctx) {
  if (xyz.shape().size() != 2 || xyz.shape()[1] != 3)
    throw std::invalid_argument("render_depth: vertices must be Nx3, got " + shape_str(xyz.shape()));
  ctx.validate(xyz.shape()[0]);

  const Projected pr = project_all(xyz, ctx);
  const double* v = xyz.data();
  const size_t npx = size_t(ctx.res_w) * size_t(ctx.res_h);

  std::vector<double> zbuf(npx, std::numeric_limits<double>::infinity());
  auto save = std::make_shared<RenderSave>();
  save->winner.assign(npx, -1);

  for (size_t f = 0; f < ctx.faces.size(); ++f) {
    int i0 = ctx.faces[f][0], i1 = ctx.faces[f][1], i2 = ctx.faces[f][2];
    double z0 = v[i0 * 3 + 2], z1 = v[i1 * 3 + 2], z2 = v[i2 * 3 + 2];
    if (z0 <= 0 || z1 <= 0 || z2 <= 0) {
      save->culled_faces++;
      continue;
    }
    double ax = pr.px[size_t(i0)], ay = pr.py[size_t(i0)];
    double bx = pr.px[size_t(i1)], by = pr.py[size_t(i1)];
    double cx = pr.px[size_t(i2)], cy = pr.py[size_t(i2)];
    double area = edge_fn(ax, ay, bx, by, cx, cy);
    if (area == 0.0) continue;  // degenerate in screen space
    if (area < 0.0) {           // normalize to counter-clockwise
      std::swap(i1, i2);
      std::swap(bx, cx);
      std::swap(by, cy);
      std::swap(z1, z2);
    }

    double xmin = std::min(ax, std::min(bx, cx));
    double xmax = std::max(ax, std::max(bx, cx));
    double ymin = std::min(ay, std::min(by, cy));
    double ymax = std::max(ay, std::max(by, cy));
    int x0 = std::max(0, int(std::floor(xmin - 0.5)));
    int x1 = std::min(ctx.res_w - 1, int(std::ceil(xmax - 0.5)) + 1);
    int y0 = std::max(0, int(std::floor(ymin - 0.5)));
    int y1 = std::min(ctx.res_h - 1, int(std::ceil(ymax - 0.5)) + 1);

    bool tl0 = top_left(bx, by, cx, cy);
    bool tl1 = top_left(cx, cy, ax, ay);
    bool tl2 = top_left(ax, ay, bx, by);

    for (int iy = y0; iy <= y1; ++iy) {
      double pyc = iy + 0.5;
      for (int ix = x0; ix <= x1; ++ix) {
        double pxc = ix + 0.5;
        double w0 = edge_fn(bx, by, cx, cy, pxc, pyc);
        double w1 = edge_fn(cx, cy, ax, ay, pxc, pyc);
        double w2 = edge_fn(ax, ay, bx, by, pxc, pyc);
        bool in0 = w0 > 0.0 || (w0 == 0.0 && tl0);
        bool in1 = w1 > 0.0 || (w1 == 0.0 && tl1);
        bool in2 = w2 > 0.0 || (w2 == 0.0 && tl2);
        if (!(in0 && in1 && in2)) continue;
        double wsum = w0 + w1 + w2;
        double invz = (w0 / z0 + w1 / z1 + w2 / z2) / wsum;
        double z = 1.0 / invz;
        size_t px = size_t(iy) * size_t(ctx.res_w) + size_t(ix);
        if (z < zbuf[px]) {
          zbuf[px] = z;
          save->winner[px] = int32_t(f);
        }
      }
    }
  }

  RenderResult res;
  res.map.width = ctx.res_w;
  res.map.height = ctx.res_h;
  res.map.values.resize(npx);
  const double range = ctx.z_far - ctx.z_near;
  for (size_t p = 0; p < npx; ++p) {
    if (save->winner[p] < 0) {
      res.map.values[p] = 1.0;
    } else {
      double t = (zbuf[p] - ctx.z_near) / range;
      res.map.values[p] = std::clamp(t, 0.0, 1.0);
    }
  }
  res.save = std::move(save);
  return res;
}

void render_depth_backward(const Tensor& xyz, const RenderContext& ctx, const RenderSave& save,
                           const double* pixel_adjoint, double* grad_acc) {
  const Projected pr = project_all(xyz, ctx);
  const double* v = xyz.data();
  const double sx = double(ctx.res_w) / ctx.cam.width;
  const double sy = double(ctx.res_h) / ctx.cam.height;
  const double range = ctx.z_far - ctx.z_near;

  for (int iy = 0; iy < ctx.res_h; ++iy) {
    for (int ix = 0; ix < ctx.res_w; ++ix) {
      size_t px = size_t(iy) * size_t(ctx.res_w) + size_t(ix);
      int32_t f = save.winner[px];
      if (f < 0) continue;
      double gout = pixel_adjoint[px];
      if (gout == 0.0) continue;

      int idx[3] = {ctx.faces[size_t(f)][0], ctx.faces[size_t(f)][1], ctx.faces[size_t(f)][2]};
      double ax = pr.px[size_t(idx[0])], ay = pr.py[size_t(idx[0])];
      double bx = pr.px[size_t(idx[1])], by = pr.py[size_t(idx[1])];
      double cx = pr.px[size_t(idx[2])], cy = pr.py[size_t(idx[2])];
      double area0 = edge_fn(ax, ay, bx, by, cx, cy);
      if (area0 == 0.0) continue;
      if (area0 < 0.0) {
        std::swap(idx[1], idx[2]);
        std::swap(bx, cx);
        std::swap(by, cy);
      }
      double X[3], Y[3], Z[3];
      for (int t = 0; t < 3; ++t) {
        X[t] = v[idx[t] * 3 + 0];
        Y[t] = v[idx[t] * 3 + 1];
        Z[t] = v[idx[t] * 3 + 2];
      }
      double pxc = ix + 0.5, pyc = iy + 0.5;
      double w[3];
      w[0] = edge_fn(bx, by, cx, cy, pxc, pyc);
      w[1] = edge_fn(cx, cy, ax, ay, pxc, pyc);
      w[2] = edge_fn(ax, ay, bx, by, pxc, pyc);
      double wsum = w[0] + w[1] + w[2];
      double invz = (w[0] / Z[0] + w[1] / Z[1] + w[2] / Z[2]) / wsum;
      double z = 1.0 / invz;
      if (z < ctx.z_near || z > ctx.z_far) continue;  // clamped pixel, no gradient

      double gz = gout / range;
      double ginvz = -z * z * gz;

      // gradients w.r.t. projected raster coordinates and direct depth terms
      double gpx[3] = {0, 0, 0}, gpy[3] = {0, 0, 0}, gZ[3] = {0, 0, 0};
      double P[3][2] = {{ax, ay}, {bx, by}, {cx, cy}};
      for (int k = 0; k < 3; ++k) {
        double lam = w[k] / wsum;
        gZ[k] += ginvz * (-lam / (Z[k] * Z[k]));
        double gw = ginvz * (1.0 / Z[k] - invz) / wsum;
        // w_k = E(p_{k+1}, p_{k+2}, pc)
        int a = (k + 1) % 3, b = (k + 2) % 3;
        double Ax = P[a][0], Ay = P[a][1], Bx = P[b][0], By = P[b][1];
        gpx[a] += gw * (By - pyc);
        gpy[a] += gw * (pxc - Bx);
        gpx[b] += gw * (pyc - Ay);
        gpy[b] += gw * (Ax - pxc);
      }
      for (int t = 0; t < 3; ++t) {
        double fxs = ctx.cam.fx * sx, fys = ctx.cam.fy * sy;
        grad_acc[idx[t] * 3 + 0] += gpx[t] * fxs / Z[t];
        grad_acc[idx[t] * 3 + 1] += gpy[t] * fys / Z[t];
        grad_acc[idx[t] * 3 + 2] +=
            gZ[t] - gpx[t] * fxs * X[t] / (Z[t] * Z[t]) - gpy[t] * fys * Y[t] / (Z[t] * Z[t]);
      }
    }
  }
}

namespace {

double point_segment_dist(double px, double py, double ax, double ay, double bx, double by) {
  double vx = bx - ax, vy = by - ay;
  double wx = px - ax, wy = py - ay;
  double vv = vx * vx + vy * vy;
  double t = vv > 0 ? std::clamp((wx * vx + wy * vy) / vv, 0.0, 1.0) : 0.0;
  double dx = wx - t * vx, dy = wy - t * vy;
  return std::sqrt(dx * dx + dy * dy);
}

}  // namespace

RenderGradCheckReport render_gradcheck(const Tensor& xyz, const RenderContext& ctx, double h,
                                       double tol, double eps) {
  RenderGradCheckReport rep;

  // precondition: no pixel center close to a non-culled triangle edge
  const Projected pr = project_all(xyz, ctx);
  const double* v = xyz.data();
  for (size_t f = 0; f < ctx.faces.size(); ++f) {
    int i0 = ctx.faces[f][0], i1 = ctx.faces[f][1], i2 = ctx.faces[f][2];
    if (v[i0 * 3 + 2] <= 0 || v[i1 * 3 + 2] <= 0 || v[i2 * 3 + 2] <= 0) continue;
    double ex[3] = {pr.px[size_t(i0)], pr.px[size_t(i1)], pr.px[size_t(i2)]};
    double ey[3] = {pr.py[size_t(i0)], pr.py[size_t(i1)], pr.py[size_t(i2)]};
    for (int iy = 0; iy < ctx.res_h; ++iy) {
      for (int ix = 0; ix < ctx.res_w; ++ix) {
        double pxc = ix + 0.5, pyc = iy + 0.5;
        for (int e = 0; e < 3; ++e) {
          double d = point_segment_dist(pxc, pyc, ex[e], ey[e], ex[(e + 1) % 3], ey[(e + 1) % 3]);
          if (d <= eps) {
            rep.skipped = true;
            rep.reason = "pixel (" + std::to_string(ix) + "," + std::to_string(iy) +
                         ") within eps of an edge of face " + std::to_string(f);
            return rep;
          }
        }
      }
    }
  }

  RenderResult fwd = render_depth(xyz, ctx);
  const size_t npx = fwd.map.values.size();
  std::vector<double> ones(npx, 1.0);
  Tensor analytic({xyz.shape()[0], 3});
  render_depth_backward(xyz, ctx, *fwd.save, ones.data(), analytic.mut());

  Tensor work = xyz;
  double* wd = work.mut();
  for (int64_t i = 0; i < xyz.numel(); ++i) {
    double orig = wd[i];
    wd[i] = orig + h;
    RenderResult rp = render_depth(work, ctx);
    wd[i] = orig - h;
    RenderResult rm = render_depth(work, ctx);
    wd[i] = orig;
    double fp = 0, fm = 0;
    for (size_t p = 0; p < npx; ++p) {
      fp += rp.map.values[p];
      fm += rm.map.values[p];
    }
    double numeric = (fp - fm) / (2 * h);
    double an = analytic.data()[i];
    double denom = std::max(std::max(std::fabs(an), std::fabs(numeric)), 1e-8);
    rep.max_rel_err = std::max(rep.max_rel_err, std::fabs(an - numeric) / denom);
  }
  rep.ok = rep.max_rel_err <= tol;
  return rep;
}

}  // namespace meshpose
