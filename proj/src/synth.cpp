#include "meshpose/synth.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "meshpose/losses.hpp"
#include "meshpose/rng.hpp"

namespace meshpose {

namespace {

constexpr int kSegments = 18;

// per-joint latitude bands as ring fractions; segment strips are [3f, 3f+2]
struct Band {
  double lo, hi;
};
constexpr Band kRootBand{0.82, 0.90};
constexpr Band kFingerBands[4] = {{0.66, 0.70}, {0.52, 0.56}, {0.38, 0.42}, {0.24, 0.28}};

std::vector<std::vector<int>> assign_landmarks(int rings, int segments) {
  auto ring_of = [&](double frac) { return int(std::floor(frac * rings)); };
  auto verts_in = [&](int r0, int r1, int s0, int s1) {
    std::vector<int> out;
    for (int r = r0; r <= r1; ++r)
      for (int s = s0; s <= s1; ++s) out.push_back(1 + r * segments + s);
    return out;
  };

  std::vector<std::vector<int>> lm(kJointCount);
  lm[kRootJoint] = verts_in(ring_of(kRootBand.lo), ring_of(kRootBand.hi), 0, segments - 1);
  for (int f = 0; f < 5; ++f) {
    for (int k = 0; k < 4; ++k) {
      const Band& b = kFingerBands[k];
      lm[size_t(1 + f * 4 + k)] =
          verts_in(ring_of(b.lo), ring_of(b.hi), 3 * f, 3 * f + 2);
    }
  }

  // bands must be non-empty and pairwise disjoint for this grid size
  std::vector<int8_t> seen;
  for (const auto& set : lm) {
    if (set.empty()) throw std::invalid_argument("template too small for the landmark table");
    for (int v : set) {
      if (size_t(v) >= seen.size()) seen.resize(size_t(v) + 1, 0);
      if (seen[size_t(v)]) throw std::invalid_argument("landmark bands overlap at this grid size");
      seen[size_t(v)] = 1;
    }
  }
  return lm;
}

// shared ring/segment grid topology: two poles plus rings x segments
std::vector<std::array<int, 3>> grid_faces(int rings, int segments) {
  std::vector<std::array<int, 3>> faces;
  const int south = 1 + rings * segments;
  auto v = [&](int r, int s) { return 1 + r * segments + (s % segments); };
  for (int s = 0; s < segments; ++s) faces.push_back({0, v(0, s + 1), v(0, s)});
  for (int r = 0; r + 1 < rings; ++r) {
    for (int s = 0; s < segments; ++s) {
      int a = v(r, s), b = v(r, s + 1), c = v(r + 1, s), d = v(r + 1, s + 1);
      faces.push_back({a, b, d});
      faces.push_back({a, d, c});
    }
  }
  for (int s = 0; s < segments; ++s) faces.push_back({south, v(rings - 1, s), v(rings - 1, s + 1)});
  return faces;
}

}  // namespace

Tensor TemplateMesh::joints_of(const Tensor& vertices) const {
  if (vertices.shape() != Shape{vertex_count(), 3})
    throw std::invalid_argument("joints_of: vertices must be " + std::to_string(vertex_count()) + "x3");
  Tensor j({int64_t(landmarks.size()), 3});
  double* out = j.mut();
  const double* v = vertices.data();
  for (size_t ji = 0; ji < landmarks.size(); ++ji) {
    double acc[3] = {0, 0, 0};
    for (int idx : landmarks[ji]) {
      acc[0] += v[idx * 3 + 0];
      acc[1] += v[idx * 3 + 1];
      acc[2] += v[idx * 3 + 2];
    }
    double b = double(landmarks[ji].size());
    out[ji * 3 + 0] = acc[0] / b;
    out[ji * 3 + 1] = acc[1] / b;
    out[ji * 3 + 2] = acc[2] / b;
  }
  return j;
}

TemplateMesh make_template(const std::string& kind, int64_t n_target) {
  if (kind != "sphere-grid" && kind != "capsule")
    throw std::invalid_argument("unknown template kind '" + kind + "'");
  int rings = int(std::llround(double(n_target - 2) / kSegments));
  rings = std::max(rings, 26);  // smallest grid the landmark table fits

  TemplateMesh t;
  t.kind = kind;
  t.rings = rings;
  t.segments = kSegments;
  t.requested_vertices = n_target;

  const int64_t n = int64_t(rings) * kSegments + 2;
  Tensor verts({n, 3});
  double* d = verts.mut();
  const double pi = std::numbers::pi;

  if (kind == "sphere-grid") {
    d[0] = 0;
    d[1] = 0;
    d[2] = kTemplateRadius;
    for (int r = 0; r < rings; ++r) {
      double theta = pi * double(r + 1) / double(rings + 1);
      for (int s = 0; s < kSegments; ++s) {
        double phi = 2 * pi * double(s) / kSegments;
        int idx = 1 + r * kSegments + s;
        d[idx * 3 + 0] = kTemplateRadius * std::sin(theta) * std::cos(phi);
        d[idx * 3 + 1] = kTemplateRadius * std::sin(theta) * std::sin(phi);
        d[idx * 3 + 2] = kTemplateRadius * std::cos(theta);
      }
    }
    int64_t south = n - 1;
    d[south * 3 + 0] = 0;
    d[south * 3 + 1] = 0;
    d[south * 3 + 2] = -kTemplateRadius;
  } else {
    // capsule: cylinder of radius 0.55R and half-length 0.8R with spherical caps
    const double a = 0.55 * kTemplateRadius;
    const double h = 0.8 * kTemplateRadius;
    auto radius_at = [&](double z) {
      if (z > h) return std::sqrt(std::max(0.0, a * a - (z - h) * (z - h)));
      if (z < -h) return std::sqrt(std::max(0.0, a * a - (z + h) * (z + h)));
      return a;
    };
    d[0] = 0;
    d[1] = 0;
    d[2] = h + a;
    for (int r = 0; r < rings; ++r) {
      double tfrac = double(r + 1) / double(rings + 1);
      double z = (h + a) * (1.0 - 2.0 * tfrac);
      double rad = radius_at(z);
      for (int s = 0; s < kSegments; ++s) {
        double phi = 2 * pi * double(s) / kSegments;
        int idx = 1 + r * kSegments + s;
        d[idx * 3 + 0] = rad * std::cos(phi);
        d[idx * 3 + 1] = rad * std::sin(phi);
        d[idx * 3 + 2] = z;
      }
    }
    int64_t south = n - 1;
    d[south * 3 + 0] = 0;
    d[south * 3 + 1] = 0;
    d[south * 3 + 2] = -(h + a);
  }

  t.topology = std::make_shared<MeshTopology>(n, grid_faces(rings, kSegments));
  t.rest_vertices = std::move(verts);
  t.landmarks = assign_landmarks(rings, kSegments);
  return t;
}

DeformationParams sample_deformation(uint64_t seed, const CameraIntrinsics& cam) {
  SplitMix64 rng(seed);
  DeformationParams p;
  p.seed = seed;

  // draw order is fixed: bump count, then per bump center/sigma/amplitude,
  // then rotation, then placement
  int nb = 3 + int(rng.below(6));  // 3..8
  double total_amp = 0;
  for (int i = 0; i < nb; ++i) {
    DeformationParams::Bump b;
    // random direction by rejection from the unit cube
    double x, y, z, norm;
    do {
      x = rng.uniform(-1, 1);
      y = rng.uniform(-1, 1);
      z = rng.uniform(-1, 1);
      norm = std::sqrt(x * x + y * y + z * z);
    } while (norm < 1e-3 || norm > 1.0);
    b.center[0] = kTemplateRadius * x / norm;
    b.center[1] = kTemplateRadius * y / norm;
    b.center[2] = kTemplateRadius * z / norm;
    b.sigma = kTemplateRadius * rng.uniform(0.4, 1.0);
    double ax, ay, az, anorm;
    do {
      ax = rng.uniform(-1, 1);
      ay = rng.uniform(-1, 1);
      az = rng.uniform(-1, 1);
      anorm = std::sqrt(ax * ax + ay * ay + az * az);
    } while (anorm < 1e-3 || anorm > 1.0);
    double mag = kTemplateRadius * rng.uniform(0.03, 0.1);
    b.amp[0] = mag * ax / anorm;
    b.amp[1] = mag * ay / anorm;
    b.amp[2] = mag * az / anorm;
    total_amp += mag;
    p.bumps.push_back(b);
  }
  // amplitude bound: sum of bump magnitudes <= 0.3 * radius
  double cap = 0.3 * kTemplateRadius;
  if (total_amp > cap) {
    double s = cap / total_amp;
    for (auto& b : p.bumps)
      for (double& a : b.amp) a *= s;
  }

  double rx, ry, rz, rn;
  do {
    rx = rng.uniform(-1, 1);
    ry = rng.uniform(-1, 1);
    rz = rng.uniform(-1, 1);
    rn = std::sqrt(rx * rx + ry * ry + rz * rz);
  } while (rn < 1e-3 || rn > 1.0);
  p.rot_axis[0] = rx / rn;
  p.rot_axis[1] = ry / rn;
  p.rot_axis[2] = rz / rn;
  p.rot_angle = rng.uniform(0, std::numbers::pi);

  double z0 = rng.uniform(700.0, 1100.0);
  double dx_px = rng.uniform(-25.0, 25.0);
  double dy_px = rng.uniform(-25.0, 25.0);
  p.root_target[0] = z0 * dx_px / cam.fx;
  p.root_target[1] = z0 * dy_px / cam.fy;
  p.root_target[2] = z0;
  return p;
}

Tensor apply_deformation(const TemplateMesh& tmpl, const DeformationParams& p) {
  const Tensor& rest = tmpl.rest_vertices;
  const int64_t n = rest.shape()[0];
  Tensor out({n, 3});
  double* o = out.mut();
  const double* v = rest.data();

  for (int64_t i = 0; i < n; ++i) {
    double px = v[i * 3], py = v[i * 3 + 1], pz = v[i * 3 + 2];
    double dx = 0, dy = 0, dz = 0;
    for (const auto& b : p.bumps) {
      double ux = px - b.center[0], uy = py - b.center[1], uz = pz - b.center[2];
      double w = std::exp(-(ux * ux + uy * uy + uz * uz) / (2 * b.sigma * b.sigma));
      dx += b.amp[0] * w;
      dy += b.amp[1] * w;
      dz += b.amp[2] * w;
    }
    o[i * 3] = px + dx;
    o[i * 3 + 1] = py + dy;
    o[i * 3 + 2] = pz + dz;
  }

  // rotation about the origin (the template is centered there)
  double c = std::cos(p.rot_angle), s = std::sin(p.rot_angle), om = 1 - c;
  const double* ax = p.rot_axis;
  double r[3][3] = {
      {c + ax[0] * ax[0] * om, ax[0] * ax[1] * om - ax[2] * s, ax[0] * ax[2] * om + ax[1] * s},
      {ax[1] * ax[0] * om + ax[2] * s, c + ax[1] * ax[1] * om, ax[1] * ax[2] * om - ax[0] * s},
      {ax[2] * ax[0] * om - ax[1] * s, ax[2] * ax[1] * om + ax[0] * s, c + ax[2] * ax[2] * om}};
  for (int64_t i = 0; i < n; ++i) {
    double x = o[i * 3], y = o[i * 3 + 1], z = o[i * 3 + 2];
    o[i * 3 + 0] = r[0][0] * x + r[0][1] * y + r[0][2] * z;
    o[i * 3 + 1] = r[1][0] * x + r[1][1] * y + r[1][2] * z;
    o[i * 3 + 2] = r[2][0] * x + r[2][1] * y + r[2][2] * z;
  }

  // place the root landmark centroid at the target
  double root[3] = {0, 0, 0};
  const auto& rootset = tmpl.landmarks[kRootJoint];
  for (int idx : rootset) {
    root[0] += o[idx * 3];
    root[1] += o[idx * 3 + 1];
    root[2] += o[idx * 3 + 2];
  }
  for (double& r0 : root) r0 /= double(rootset.size());
  for (int64_t i = 0; i < n; ++i) {
    o[i * 3 + 0] += p.root_target[0] - root[0];
    o[i * 3 + 1] += p.root_target[1] - root[1];
    o[i * 3 + 2] += p.root_target[2] - root[2];
  }
  return out;
}

GenParams GenParams::defaults() {
  GenParams gp;
  gp.camera.fx = gp.camera.fy = 700.0;
  gp.camera.cx = gp.camera.cy = 128.0;
  gp.camera.width = gp.camera.height = 256;
  return gp;
}

Tensor Sample::image_tensor() const {
  std::vector<double> d(image.begin(), image.end());
  return Tensor({int64_t(camera.height), int64_t(camera.width), 3}, std::move(d));
}

Tensor Sample::heatmap_tensor() const {
  std::vector<double> d(heatmaps.begin(), heatmaps.end());
  int64_t hm = int64_t(std::llround(std::sqrt(double(heatmaps.size() / kJointCount))));
  return Tensor({kJointCount, hm, hm}, std::move(d));
}

Sample generate_sample(const TemplateMesh& tmpl, uint64_t seed, const GenParams& gp) {
  gp.camera.validate();
  Sample smp;
  smp.seed = seed;
  smp.camera = gp.camera;
  smp.z_near = gp.z_near;
  smp.z_far = gp.z_far;

  Tensor posed;
  uint64_t try_seed = seed;
  for (int attempt = 0;; ++attempt) {
    if (attempt > 64) throw std::runtime_error("generate_sample: kept landing behind the camera");
    DeformationParams params = sample_deformation(try_seed, gp.camera);
    posed = apply_deformation(tmpl, params);
    double minz = posed.data()[2];
    for (int64_t i = 0; i < posed.shape()[0]; ++i) minz = std::min(minz, posed.data()[i * 3 + 2]);
    if (minz > gp.z_near) break;
    smp.resample_attempts++;
    try_seed = try_seed + 1000003;  // deterministic resample offset
  }

  smp.mesh3d = posed;
  smp.joints3d = tmpl.joints_of(posed);

  const double* j = smp.joints3d.data();
  double root_depth = j[kRootJoint * 3 + 2];
  double bx = j[kScaleBoneA * 3 + 0] - j[kScaleBoneB * 3 + 0];
  double by = j[kScaleBoneA * 3 + 1] - j[kScaleBoneB * 3 + 1];
  double bz = j[kScaleBoneA * 3 + 2] - j[kScaleBoneB * 3 + 2];
  smp.root_scale = RootScale{root_depth, std::sqrt(bx * bx + by * by + bz * bz)};

  smp.uvd = xyz_to_uvd(smp.mesh3d, gp.camera, smp.root_scale);
  smp.mesh2d = Tensor({smp.uvd.shape()[0], 2});
  {
    double* m2 = smp.mesh2d.mut();
    const double* u = smp.uvd.data();
    for (int64_t i = 0; i < smp.uvd.shape()[0]; ++i) {
      m2[i * 2 + 0] = u[i * 3 + 0];
      m2[i * 2 + 1] = u[i * 3 + 1];
    }
  }

  // heat-maps from projected joints
  Tensor joints_uv({kJointCount, 2});
  {
    double* ju = joints_uv.mut();
    for (int64_t ji = 0; ji < kJointCount; ++ji) {
      double z = j[ji * 3 + 2];
      ju[ji * 2 + 0] = (gp.camera.fx * j[ji * 3 + 0] / z + gp.camera.cx) / gp.camera.width;
      ju[ji * 2 + 1] = (gp.camera.fy * j[ji * 3 + 1] / z + gp.camera.cy) / gp.camera.height;
    }
  }
  Tensor hm = make_gaussian_heatmaps(joints_uv, gp.heatmap_size, gp.heatmap_sigma);
  smp.heatmaps.assign(hm.data(), hm.data() + hm.numel());

  // reference depth map
  RenderContext dctx;
  dctx.faces = tmpl.topology->faces();
  dctx.cam = gp.camera;
  dctx.res_w = dctx.res_h = gp.depth_res;
  dctx.z_near = gp.z_near;
  dctx.z_far = gp.z_far;
  smp.depth = render_depth(smp.mesh3d, dctx).map;

  // image proxy: full-resolution depth render tinted into three channels
  RenderContext ictx = dctx;
  ictx.res_w = gp.camera.width;
  ictx.res_h = gp.camera.height;
  DepthMap full = render_depth(smp.mesh3d, ictx).map;
  smp.image.assign(size_t(gp.camera.width) * size_t(gp.camera.height) * 3, 0.0f);
  for (int y = 0; y < gp.camera.height; ++y) {
    for (int x = 0; x < gp.camera.width; ++x) {
      double v = full.at(y, x);
      size_t base = (size_t(y) * size_t(gp.camera.width) + size_t(x)) * 3;
      if (v < 1.0) {  // silhouette with a depth tint
        smp.image[base + 0] = float(1.0 - v);
        smp.image[base + 1] = float(0.25 + 0.5 * (1.0 - v));
        smp.image[base + 2] = float(0.2 + 0.6 * v);
      }
    }
  }
  return smp;
}

}  // namespace meshpose
