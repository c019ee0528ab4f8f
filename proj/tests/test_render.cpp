#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdio>
#include <filesystem>

#include "doctest.h"
#include "meshpose/camera.hpp"
#include "meshpose/rasterfile.hpp"
#include "meshpose/render.hpp"
#include "meshpose/tape.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace meshpose;
using meshpose::testutil::raycast_depth_oracle;

namespace {

CameraIntrinsics unit_camera() {
  CameraIntrinsics cam;
  cam.fx = cam.fy = 32;
  cam.cx = cam.cy = 16;
  cam.width = cam.height = 32;
  return cam;
}

RenderContext make_ctx(std::vector<std::array<int, 3>> faces) {
  RenderContext ctx;
  ctx.faces = std::move(faces);
  ctx.cam = unit_camera();
  ctx.res_w = ctx.res_h = 32;
  ctx.z_near = 0.1;
  ctx.z_far = 2.0;
  return ctx;
}

// random mesh fully in front of the camera, roughly inside the frustum
Tensor random_scene(SplitMix64& rng, int max_verts, std::vector<std::array<int, 3>>* faces) {
  int n = 3 + int(rng.below(uint64_t(max_verts - 2)));
  Tensor xyz({n, 3});
  double* d = xyz.mut();
  for (int i = 0; i < n; ++i) {
    double z = rng.uniform(0.4, 1.6);
    d[i * 3 + 0] = z * rng.uniform(-0.45, 0.45);
    d[i * 3 + 1] = z * rng.uniform(-0.45, 0.45);
    d[i * 3 + 2] = z;
  }
  int f = 1 + int(rng.below(uint64_t(2 * n)));
  faces->clear();
  for (int t = 0; t < f; ++t) {
    int a = int(rng.below(uint64_t(n))), b = 0, c = 0;
    do b = int(rng.below(uint64_t(n)));
    while (b == a);
    do c = int(rng.below(uint64_t(n)));
    while (c == a || c == b);
    faces->push_back({a, b, c});
  }
  return xyz;
}

// random triangles with bounded tilt against the image plane, so none is
// close to edge-on for any frustum ray
Tensor random_gentle_scene(SplitMix64& rng, int max_tris, std::vector<std::array<int, 3>>* faces) {
  int t = 1 + int(rng.below(uint64_t(max_tris)));
  Tensor xyz({3 * t, 3});
  double* d = xyz.mut();
  faces->clear();
  for (int i = 0; i < t; ++i) {
    double zc = rng.uniform(0.5, 1.4);
    double cxw = zc * rng.uniform(-0.35, 0.35);
    double cyw = zc * rng.uniform(-0.35, 0.35);
    double e = zc * rng.uniform(0.05, 0.4);
    for (int k = 0; k < 3; ++k) {
      d[(3 * i + k) * 3 + 0] = cxw + e * rng.uniform(-1, 1);
      d[(3 * i + k) * 3 + 1] = cyw + e * rng.uniform(-1, 1);
      d[(3 * i + k) * 3 + 2] = zc + 0.2 * e * rng.uniform(-1, 1);
    }
    faces->push_back({3 * i, 3 * i + 1, 3 * i + 2});
  }
  return xyz;
}

}  // namespace

TEST_CASE("uvd/xyz conversions") {
  CameraIntrinsics cam;
  cam.fx = cam.fy = 100;
  cam.cx = cam.cy = 0;
  cam.width = cam.height = 100;
  RootScale rs{2.0, 1.0};

  SUBCASE("principal-point ray") {
    CameraIntrinsics c2 = unit_camera();
    Tensor uvd({1, 3}, {0.5, 0.5, 0.0});  // u*width = 16 = cx
    auto r = uvd_to_xyz(uvd, c2, rs);
    CHECK(r.xyz.at({0, 0}) == 0.0);
    CHECK(r.xyz.at({0, 1}) == 0.0);
    CHECK(r.xyz.at({0, 2}) == 2.0);
  }
  SUBCASE("hand pinhole example") {
    Tensor uvd({1, 3}, {0.5, 0.5, 0.0});
    auto r = uvd_to_xyz(uvd, cam, rs);
    CHECK(r.xyz.at({0, 0}) == doctest::Approx(1.0));
    CHECK(r.xyz.at({0, 1}) == doctest::Approx(1.0));
    CHECK(r.xyz.at({0, 2}) == doctest::Approx(2.0));
  }
  SUBCASE("doubling scale doubles z - root_depth") {
    SplitMix64 rng(3);
    Tensor uvd = meshpose::testutil::random_tensor(rng, {5, 3}, 0.1, 0.9);
    auto r1 = uvd_to_xyz(uvd, cam, RootScale{2.0, 1.0});
    auto r2 = uvd_to_xyz(uvd, cam, RootScale{2.0, 2.0});
    for (int64_t i = 0; i < 5; ++i) {
      CHECK(r2.xyz.at({i, 2}) - 2.0 == doctest::Approx(2.0 * (r1.xyz.at({i, 2}) - 2.0)));
    }
  }
  SUBCASE("nonpositive depth is flagged but returned") {
    Tensor uvd({2, 3}, {0.5, 0.5, 0.0, 0.5, 0.5, -3.0});
    auto r = uvd_to_xyz(uvd, cam, rs);
    CHECK(r.nonpositive_depth == 1);
    CHECK(r.xyz.shape() == Shape{2, 3});
  }
  SUBCASE("round trip") {
    SplitMix64 rng(4);
    Tensor uvd = meshpose::testutil::random_tensor(rng, {8, 3}, 0.05, 0.95);
    auto r = uvd_to_xyz(uvd, cam, rs);
    Tensor back = xyz_to_uvd(r.xyz, cam, rs);
    CHECK(meshpose::testutil::max_abs_diff(back, uvd) < 1e-12);
  }
}

TEST_CASE("camera json io") {
  CameraIntrinsics cam = unit_camera();
  std::string text = camera_to_json_text(cam);
  CameraIntrinsics back = camera_from_json_text(text);
  CHECK(back.fx == cam.fx);
  CHECK(back.width == cam.width);
  CHECK_THROWS(camera_from_json_text("{\"fx\": 1}"));
}

TEST_CASE("render: empty scene is all background") {
  RenderContext ctx = make_ctx({});
  Tensor xyz({1, 3}, {0, 0, 1});
  RenderResult r = render_depth(xyz, ctx);
  for (double v : r.map.values) CHECK(v == 1.0);
}

TEST_CASE("render: full-cover triangle parallel to the image plane") {
  // huge triangle at z=1 covering the whole raster
  double z = 1.0;
  Tensor xyz({3, 3}, {-4 * z, -4 * z, z, 4 * z, -4 * z, z, 0, 6 * z, z});
  RenderContext ctx = make_ctx({{0, 1, 2}});
  RenderResult r = render_depth(xyz, ctx);
  double expect = (z - ctx.z_near) / (ctx.z_far - ctx.z_near);
  for (double v : r.map.values) CHECK(v == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("render: equality with the ray-cast oracle on 50 random meshes") {
  SplitMix64 rng(55);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::array<int, 3>> faces;
    Tensor xyz = random_scene(rng, 30, &faces);
    RenderContext ctx = make_ctx(faces);
    RenderResult r = render_depth(xyz, ctx);
    DepthMap oracle = raycast_depth_oracle(xyz, ctx);
    double max_diff = 0;
    for (size_t p = 0; p < oracle.values.size(); ++p)
      max_diff = std::max(max_diff, std::fabs(oracle.values[p] - r.map.values[p]));
    CHECK(max_diff == 0.0);
  }
}

TEST_CASE("render: values in [0,1], background exactly 1") {
  SplitMix64 rng(56);
  std::vector<std::array<int, 3>> faces;
  Tensor xyz = random_scene(rng, 20, &faces);
  RenderContext ctx = make_ctx(faces);
  RenderResult r = render_depth(xyz, ctx);
  for (size_t p = 0; p < r.map.values.size(); ++p) {
    CHECK(r.map.values[p] >= 0.0);
    CHECK(r.map.values[p] <= 1.0);
    if (r.save->winner[p] < 0) CHECK(r.map.values[p] == 1.0);
  }
}

// Pixel-wise monotonicity under +dz cannot hold for arbitrary scenes: the
// lateral footprint shift of perspective projection can slide a nearer
// triangle over a pixel another triangle used to win. It is a theorem for a
// single triangle that is not close to edge-on, which is what we check.
TEST_CASE("render: moving a triangle farther never decreases a foreground pixel") {
  SplitMix64 rng(57);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::array<int, 3>> faces;
    Tensor xyz = random_gentle_scene(rng, 1, &faces);
    RenderContext ctx = make_ctx(faces);
    RenderResult before = render_depth(xyz, ctx);
    Tensor moved = xyz;
    double* d = moved.mut();
    double dz = rng.uniform(0.01, 0.3);
    for (int64_t i = 0; i < moved.shape()[0]; ++i) d[i * 3 + 2] += dz;
    RenderResult after = render_depth(moved, ctx);
    for (size_t p = 0; p < before.map.values.size(); ++p) {
      if (before.map.values[p] < 1.0)
        CHECK(after.map.values[p] >= before.map.values[p] - 1e-12);
    }
  }
}

TEST_CASE("render: nearer of two stacked triangles wins") {
  // two triangles, same screen footprint, different depths
  Tensor xyz({6, 3},
             {-4, -4, 1.0, 4, -4, 1.0, 0, 6, 1.0,
              -4 * 1.5, -4 * 1.5, 1.5, 4 * 1.5, -4 * 1.5, 1.5, 0, 6 * 1.5, 1.5});
  RenderContext ctx = make_ctx({{3, 4, 5}, {0, 1, 2}});  // far one listed first
  RenderResult r = render_depth(xyz, ctx);
  double expect = (1.0 - ctx.z_near) / (ctx.z_far - ctx.z_near);
  for (size_t p = 0; p < r.map.values.size(); ++p) {
    CHECK(r.map.values[p] == doctest::Approx(expect).epsilon(1e-12));
    CHECK(r.save->winner[p] == 1);
  }
}

TEST_CASE("render: faces touching z<=0 are culled and tallied") {
  Tensor xyz({4, 3}, {-4, -4, 1, 4, -4, 1, 0, 6, 1, 0, 0, -0.5});
  RenderContext ctx = make_ctx({{0, 1, 2}, {0, 1, 3}});
  RenderResult r = render_depth(xyz, ctx);
  CHECK(r.save->culled_faces == 1);
}

TEST_CASE("render gradcheck") {
  SUBCASE("single covering triangle matches finite differences") {
    Tensor xyz({3, 3}, {-3.0, -3.0, 0.9, 3.0, -3.0, 1.1, 0.0, 4.5, 1.3});
    RenderContext ctx = make_ctx({{0, 1, 2}});
    RenderGradCheckReport rep = render_gradcheck(xyz, ctx, 1e-6, 1e-4);
    CHECK_FALSE(rep.skipped);
    CHECK(rep.ok);
  }
  SUBCASE("x-translation of a parallel plane has zero gradient") {
    Tensor xyz({3, 3}, {-4, -4, 1.0, 4, -4, 1.0, 0, 6, 1.0});
    RenderContext ctx = make_ctx({{0, 1, 2}});
    RenderResult r = render_depth(xyz, ctx);
    std::vector<double> ones(r.map.values.size(), 1.0);
    Tensor grad({3, 3});
    render_depth_backward(xyz, ctx, *r.save, ones.data(), grad.mut());
    for (int64_t i = 0; i < 3; ++i) {
      CHECK(grad.at({i, 0}) == doctest::Approx(0.0).epsilon(1e-12));
      CHECK(grad.at({i, 1}) == doctest::Approx(0.0).epsilon(1e-12));
    }
  }
  SUBCASE("occluded geometry receives zero gradient") {
    Tensor xyz({6, 3},
               {-4, -4, 1.0, 4, -4, 1.0, 0, 6, 1.0,
                -6, -6, 1.5, 6, -6, 1.5, 0, 9, 1.5});
    RenderContext ctx = make_ctx({{0, 1, 2}, {3, 4, 5}});
    RenderResult r = render_depth(xyz, ctx);
    std::vector<double> ones(r.map.values.size(), 1.0);
    Tensor grad({6, 3});
    render_depth_backward(xyz, ctx, *r.save, ones.data(), grad.mut());
    for (int64_t i = 3; i < 6; ++i)
      for (int64_t c = 0; c < 3; ++c) CHECK(grad.at({i, c}) == 0.0);
  }
  SUBCASE("edge-proximate configurations are skipped with a reason") {
    // vertical edge exactly through pixel centers at x = 16.5
    Tensor xyz({3, 3});
    double* d = xyz.mut();
    double z = 1.0;
    auto unproject = [&](double px, double py, int i) {
      d[i * 3 + 0] = (px - 16.0) * z / 32.0;
      d[i * 3 + 1] = (py - 16.0) * z / 32.0;
      d[i * 3 + 2] = z;
    };
    unproject(16.5, 2.0, 0);
    unproject(16.5, 30.0, 1);
    unproject(28.0, 16.0, 2);
    RenderContext ctx = make_ctx({{0, 1, 2}});
    RenderGradCheckReport rep = render_gradcheck(xyz, ctx, 1e-6, 1e-4);
    CHECK(rep.skipped);
    CHECK_FALSE(rep.reason.empty());
  }
}

TEST_CASE("render through the tape agrees with the direct renderer") {
  SplitMix64 rng(58);
  std::vector<std::array<int, 3>> faces;
  Tensor xyz = random_scene(rng, 15, &faces);
  auto ctx = std::make_shared<RenderContext>(make_ctx(faces));
  Tape t;
  Value v = t.parameter(xyz);
  Value img = t.render_depth(v, ctx);
  RenderResult direct = render_depth(xyz, *ctx);
  const Tensor& out = t.val(img);
  for (size_t p = 0; p < direct.map.values.size(); ++p)
    CHECK(out.data()[p] == direct.map.values[p]);
  // gradient flows
  Gradients g = t.backward(t.reduce_sum(img));
  CHECK(g.at(v).shape() == xyz.shape());
}

TEST_CASE("dpth file round trip") {
  DepthMap m;
  m.width = 3;
  m.height = 2;
  m.values = {0.0f, 0.25f, 0.5f, 0.75f, 1.0f, 0.125f};
  std::string path = (std::filesystem::temp_directory_path() / "meshpose_test.dpth").string();
  write_dpth(path, m);
  DepthMap back = read_dpth(path);
  CHECK(back.width == 3);
  CHECK(back.height == 2);
  for (size_t i = 0; i < m.values.size(); ++i) CHECK(back.values[i] == m.values[i]);
  std::filesystem::remove(path);
}

TEST_CASE("rast file round trip") {
  std::string path = (std::filesystem::temp_directory_path() / "meshpose_test.rast").string();
  std::vector<float> data{1.5f, -2.0f, 0.0f, 3.25f, 4.0f, 5.0f};
  write_rast(path, {3, 2}, data);
  RastFile f = read_rast(path);
  CHECK(f.dims == std::vector<uint32_t>{3, 2});
  CHECK(f.data == data);
  std::filesystem::remove(path);
}
