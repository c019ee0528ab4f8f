#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>

#include "doctest.h"
#include "meshpose/dataset.hpp"
#include "meshpose/synth.hpp"
#include "test_util.hpp"

using namespace meshpose;
namespace fs = std::filesystem;

TEST_CASE("sphere-grid template at 1280 vertices") {
  TemplateMesh t = make_template("sphere-grid", 1280);
  CHECK(t.vertex_count() == 1280);
  CHECK(t.topology->faces().size() == 2556);
  CHECK(t.rings == 71);
  CHECK(t.segments == 18);
}

TEST_CASE("templates are closed manifolds: every edge borders exactly 2 faces") {
  for (const char* kind : {"sphere-grid", "capsule"}) {
    TemplateMesh t = make_template(kind, 470);
    std::map<std::pair<int, int>, int> edge_faces;
    for (const auto& f : t.topology->faces()) {
      for (auto [a, b] : {std::pair{f[0], f[1]}, std::pair{f[1], f[2]}, std::pair{f[2], f[0]}})
        edge_faces[{std::min(a, b), std::max(a, b)}]++;
    }
    for (const auto& [e, c] : edge_faces) CHECK(c == 2);
    CHECK(edge_faces.size() == t.topology->edges().size());
  }
}

TEST_CASE("template determinism and nearest-achievable vertex count") {
  TemplateMesh a = make_template("sphere-grid", 1000);
  TemplateMesh b = make_template("sphere-grid", 1000);
  CHECK(meshpose::testutil::bitwise_equal(a.rest_vertices, b.rest_vertices));
  CHECK(a.vertex_count() == b.vertex_count());
  // 1000 is not representable on an 18-segment grid; nearest is 55 rings
  CHECK(a.requested_vertices == 1000);
  CHECK(a.vertex_count() == 55 * 18 + 2);
}

TEST_CASE("landmarks are disjoint, non-empty, and carry the scale bone") {
  TemplateMesh t = make_template("sphere-grid", 1280);
  REQUIRE(t.landmarks.size() == size_t(kJointCount));
  std::vector<int> seen(size_t(t.vertex_count()), 0);
  for (const auto& set : t.landmarks) {
    CHECK_FALSE(set.empty());
    for (int v : set) {
      CHECK(seen[size_t(v)] == 0);
      seen[size_t(v)] = 1;
    }
  }
  CHECK(kScaleBoneA == 9);
  CHECK(kScaleBoneB == 10);
}

TEST_CASE("deformation parameters") {
  GenParams gp = GenParams::defaults();
  SUBCASE("same seed gives identical parameters") {
    DeformationParams a = sample_deformation(17, gp.camera);
    DeformationParams b = sample_deformation(17, gp.camera);
    REQUIRE(a.bumps.size() == b.bumps.size());
    CHECK(std::memcmp(a.rot_axis, b.rot_axis, sizeof(a.rot_axis)) == 0);
    CHECK(a.rot_angle == b.rot_angle);
    for (size_t i = 0; i < a.bumps.size(); ++i) {
      CHECK(std::memcmp(a.bumps[i].amp, b.bumps[i].amp, sizeof(a.bumps[i].amp)) == 0);
    }
  }
  SUBCASE("bump count within [3,8] and amplitude bound holds") {
    TemplateMesh t = make_template("sphere-grid", 470);
    for (uint64_t seed = 0; seed < 30; ++seed) {
      DeformationParams p = sample_deformation(seed, gp.camera);
      CHECK(p.bumps.size() >= 3);
      CHECK(p.bumps.size() <= 8);
      Tensor posed = apply_deformation(t, p);
      // max displacement before the rigid part is bounded by the amp sum
      double cap = 0;
      for (const auto& b : p.bumps)
        cap += std::sqrt(b.amp[0] * b.amp[0] + b.amp[1] * b.amp[1] + b.amp[2] * b.amp[2]);
      CHECK(cap <= 0.3 * kTemplateRadius + 1e-9);
    }
  }
  SUBCASE("distinct seeds give distinct parameters") {
    int collisions = 0;
    DeformationParams prev = sample_deformation(0, gp.camera);
    for (uint64_t seed = 1; seed < 1000; ++seed) {
      DeformationParams cur = sample_deformation(seed, gp.camera);
      if (cur.rot_angle == prev.rot_angle && cur.bumps.size() == prev.bumps.size()) collisions++;
      prev = cur;
    }
    CHECK(collisions == 0);
  }
}

TEST_CASE("generated samples satisfy their invariants") {
  TemplateMesh t = make_template("sphere-grid", 1280);
  GenParams gp = GenParams::defaults();
  for (uint64_t seed : {1ull, 7ull, 42ull}) {
    Sample s = generate_sample(t, seed, gp);

    // root-relative convention: d of the root landmark centroid is 0
    CHECK(s.joints3d.at({kRootJoint, 2}) == doctest::Approx(s.root_scale.root_depth));

    // uvd round-trips to mesh3d within 1e-9
    auto back = uvd_to_xyz(s.uvd, s.camera, s.root_scale);
    CHECK(meshpose::testutil::max_abs_diff(back.xyz, s.mesh3d) < 1e-9);

    // scale convention: the normalized bone has unit length
    double bx = (s.joints3d.at({kScaleBoneA, 0}) - s.joints3d.at({kScaleBoneB, 0})) / s.root_scale.scale;
    double by = (s.joints3d.at({kScaleBoneA, 1}) - s.joints3d.at({kScaleBoneB, 1})) / s.root_scale.scale;
    double bz = (s.joints3d.at({kScaleBoneA, 2}) - s.joints3d.at({kScaleBoneB, 2})) / s.root_scale.scale;
    CHECK(std::sqrt(bx * bx + by * by + bz * bz) == doctest::Approx(1.0).epsilon(1e-12));

    // depth_gt equals render_depth(mesh3d) bit for bit
    RenderContext ctx;
    ctx.faces = t.topology->faces();
    ctx.cam = s.camera;
    ctx.res_w = ctx.res_h = 32;
    ctx.z_near = s.z_near;
    ctx.z_far = s.z_far;
    DepthMap again = render_depth(s.mesh3d, ctx).map;
    REQUIRE(again.values.size() == s.depth.values.size());
    for (size_t p = 0; p < again.values.size(); ++p) CHECK(again.values[p] == s.depth.values[p]);

    // heat-map peak 1 at the joint pixel; foreground present in the depth map
    Tensor hm = s.heatmap_tensor();
    double peak = 0;
    for (int64_t i = 0; i < hm.numel(); ++i) peak = std::max(peak, hm.data()[i]);
    CHECK(peak == 1.0);
    int fg = 0;
    for (double v : s.depth.values) fg += v < 1.0;
    CHECK(fg > 0);
  }
}

TEST_CASE("dataset write/read round trip is bitwise") {
  fs::path dir = fs::temp_directory_path() / "meshpose_ds_test";
  fs::remove_all(dir);
  TemplateMesh t = make_template("sphere-grid", 470);
  GenParams gp = GenParams::defaults();
  write_dataset(dir.string(), t, 3, 99, gp);

  // manifest has one line per sample
  {
    std::ifstream mf(dir / "manifest.jsonl");
    int lines = 0;
    std::string line;
    while (std::getline(mf, line))
      if (!line.empty()) lines++;
    CHECK(lines == 3);
  }

  Dataset ds = read_dataset(dir.string());
  CHECK(ds.skipped.empty());
  REQUIRE(ds.samples.size() == 3);
  for (int64_t i = 0; i < 3; ++i) {
    Sample gen = generate_sample(t, 99 + uint64_t(i), gp);
    const Sample& rd = ds.samples[size_t(i)];
    CHECK(rd.seed == 99 + uint64_t(i));
    CHECK(rd.image == gen.image);
    CHECK(rd.heatmaps == gen.heatmaps);
    CHECK(meshpose::testutil::bitwise_equal(rd.mesh3d, gen.mesh3d));
    CHECK(meshpose::testutil::bitwise_equal(rd.uvd, gen.uvd));
    CHECK(meshpose::testutil::bitwise_equal(rd.joints3d, gen.joints3d));
    CHECK(rd.root_scale.root_depth == gen.root_scale.root_depth);
    CHECK(rd.root_scale.scale == gen.root_scale.scale);
    CHECK(rd.depth.values == gen.depth.values);
  }
  fs::remove_all(dir);
}

TEST_CASE("dataset writes are byte-identical across runs") {
  fs::path d1 = fs::temp_directory_path() / "meshpose_ds_a";
  fs::path d2 = fs::temp_directory_path() / "meshpose_ds_b";
  fs::remove_all(d1);
  fs::remove_all(d2);
  TemplateMesh t = make_template("sphere-grid", 470);
  GenParams gp = GenParams::defaults();
  write_dataset(d1.string(), t, 2, 5, gp);
  write_dataset(d2.string(), t, 2, 5, gp);
  for (const auto& entry : fs::directory_iterator(d1)) {
    auto name = entry.path().filename();
    std::ifstream a(entry.path(), std::ios::binary), b(d2 / name, std::ios::binary);
    REQUIRE(b.good());
    std::string sa((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
    std::string sb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
    CHECK(sa == sb);
  }
  fs::remove_all(d1);
  fs::remove_all(d2);
}

TEST_CASE("corrupt blobs are reported and skipped") {
  fs::path dir = fs::temp_directory_path() / "meshpose_ds_corrupt";
  fs::remove_all(dir);
  TemplateMesh t = make_template("sphere-grid", 470);
  write_dataset(dir.string(), t, 2, 7, GenParams::defaults());
  // truncate one heat-map file
  {
    std::ofstream f(dir / "000001.hm.f32", std::ios::binary | std::ios::trunc);
    f << "RAST";
  }
  Dataset ds = read_dataset(dir.string());
  CHECK(ds.samples.size() == 1);
  REQUIRE(ds.skipped.size() == 1);
  CHECK(ds.skipped[0].index == 1);
  fs::remove_all(dir);
}

TEST_CASE("empty dataset (count 0) is valid") {
  fs::path dir = fs::temp_directory_path() / "meshpose_ds_empty";
  fs::remove_all(dir);
  TemplateMesh t = make_template("sphere-grid", 470);
  write_dataset(dir.string(), t, 0, 1, GenParams::defaults());
  Dataset ds = read_dataset(dir.string());
  CHECK(ds.samples.empty());
  CHECK(ds.skipped.empty());
  fs::remove_all(dir);
}

TEST_CASE("unknown template kind is rejected") {
  CHECK_THROWS_AS(make_template("torus", 500), std::invalid_argument);
}
