#include "meshpose/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "meshpose/losses.hpp"
#include "meshpose/rasterfile.hpp"

namespace meshpose {

namespace {

namespace fs = std::filesystem;

std::string sample_stem(int64_t index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%06lld", static_cast<long long>(index));
  return buf;
}

nlohmann::json camera_json(const CameraIntrinsics& cam) {
  nlohmann::json j;
  j["fx"] = cam.fx;
  j["fy"] = cam.fy;
  j["cx"] = cam.cx;
  j["cy"] = cam.cy;
  j["width"] = cam.width;
  j["height"] = cam.height;
  return j;
}

CameraIntrinsics camera_from(const nlohmann::json& j) {
  CameraIntrinsics cam;
  cam.fx = j.at("fx").get<double>();
  cam.fy = j.at("fy").get<double>();
  cam.cx = j.at("cx").get<double>();
  cam.cy = j.at("cy").get<double>();
  cam.width = j.at("width").get<int>();
  cam.height = j.at("height").get<int>();
  cam.validate();
  return cam;
}

// the derivable parts of a sample, recomputed from the mesh; used both when
// writing (to produce the blobs) and when reading (to validate them)
struct Derived {
  Tensor joints3d, uvd, mesh2d;
  RootScale rs;
  std::vector<float> heatmaps;
  DepthMap depth;
  std::vector<float> image;
};

Derived derive(const TemplateMesh& tmpl, const Tensor& mesh3d, const GenParams& gp) {
  Derived d;
  d.joints3d = tmpl.joints_of(mesh3d);
  const double* j = d.joints3d.data();
  double bx = j[kScaleBoneA * 3 + 0] - j[kScaleBoneB * 3 + 0];
  double by = j[kScaleBoneA * 3 + 1] - j[kScaleBoneB * 3 + 1];
  double bz = j[kScaleBoneA * 3 + 2] - j[kScaleBoneB * 3 + 2];
  d.rs = RootScale{j[kRootJoint * 3 + 2], std::sqrt(bx * bx + by * by + bz * bz)};
  d.uvd = xyz_to_uvd(mesh3d, gp.camera, d.rs);
  d.mesh2d = Tensor({d.uvd.shape()[0], 2});
  double* m2 = d.mesh2d.mut();
  for (int64_t i = 0; i < d.uvd.shape()[0]; ++i) {
    m2[i * 2 + 0] = d.uvd.data()[i * 3 + 0];
    m2[i * 2 + 1] = d.uvd.data()[i * 3 + 1];
  }

  Tensor joints_uv({kJointCount, 2});
  double* ju = joints_uv.mut();
  for (int64_t ji = 0; ji < kJointCount; ++ji) {
    double z = j[ji * 3 + 2];
    ju[ji * 2 + 0] = (gp.camera.fx * j[ji * 3 + 0] / z + gp.camera.cx) / gp.camera.width;
    ju[ji * 2 + 1] = (gp.camera.fy * j[ji * 3 + 1] / z + gp.camera.cy) / gp.camera.height;
  }
  Tensor hm = make_gaussian_heatmaps(joints_uv, gp.heatmap_size, gp.heatmap_sigma);
  d.heatmaps.assign(hm.data(), hm.data() + hm.numel());

  RenderContext dctx;
  dctx.faces = tmpl.topology->faces();
  dctx.cam = gp.camera;
  dctx.res_w = dctx.res_h = gp.depth_res;
  dctx.z_near = gp.z_near;
  dctx.z_far = gp.z_far;
  d.depth = render_depth(mesh3d, dctx).map;

  RenderContext ictx = dctx;
  ictx.res_w = gp.camera.width;
  ictx.res_h = gp.camera.height;
  DepthMap full = render_depth(mesh3d, ictx).map;
  d.image.assign(size_t(gp.camera.width) * size_t(gp.camera.height) * 3, 0.0f);
  for (int y = 0; y < gp.camera.height; ++y)
    for (int x = 0; x < gp.camera.width; ++x) {
      double v = full.at(y, x);
      size_t base = (size_t(y) * size_t(gp.camera.width) + size_t(x)) * 3;
      if (v < 1.0) {
        d.image[base + 0] = float(1.0 - v);
        d.image[base + 1] = float(0.25 + 0.5 * (1.0 - v));
        d.image[base + 2] = float(0.2 + 0.6 * v);
      }
    }
  return d;
}

}  // namespace

DatasetWriteReport write_dataset(const std::string& dir, const TemplateMesh& tmpl, int64_t count,
                                 uint64_t seed0, const GenParams& gp) {
  fs::create_directories(dir);
  save_camera_json(gp.camera, (fs::path(dir) / "camera.json").string());

  std::ofstream manifest(fs::path(dir) / "manifest.jsonl", std::ios::binary);
  if (!manifest) throw std::runtime_error("cannot write manifest in " + dir);

  DatasetWriteReport report;
  for (int64_t i = 0; i < count; ++i) {
    Sample s = generate_sample(tmpl, seed0 + uint64_t(i), gp);
    s.index = i;
    std::string stem = sample_stem(i);

    write_rast((fs::path(dir) / (stem + ".img.f32")).string(),
               {uint32_t(gp.camera.height), uint32_t(gp.camera.width), 3}, s.image);
    write_rast((fs::path(dir) / (stem + ".hm.f32")).string(),
               {uint32_t(kJointCount), uint32_t(gp.heatmap_size), uint32_t(gp.heatmap_size)},
               s.heatmaps);
    save_obj(s.mesh3d, tmpl.topology->faces(), (fs::path(dir) / (stem + ".mesh.obj")).string());
    write_dpth((fs::path(dir) / (stem + ".depth.dpth")).string(), s.depth);

    nlohmann::json rec;
    rec["index"] = i;
    rec["seed"] = s.seed;
    rec["resample_attempts"] = s.resample_attempts;
    rec["files"] = {{"image", stem + ".img.f32"},
                    {"heatmaps", stem + ".hm.f32"},
                    {"mesh", stem + ".mesh.obj"},
                    {"depth", stem + ".depth.dpth"}};
    rec["camera"] = camera_json(gp.camera);
    rec["depth_range"] = {gp.z_near, gp.z_far};
    rec["template"] = {{"kind", tmpl.kind}, {"vertices", tmpl.requested_vertices}};
    rec["gen"] = {{"depth_res", gp.depth_res},
                  {"heatmap_size", gp.heatmap_size},
                  {"heatmap_sigma", gp.heatmap_sigma}};
    manifest << rec.dump() << "\n";
    report.written++;
  }
  return report;
}

Dataset read_dataset(const std::string& dir) {
  std::ifstream manifest(fs::path(dir) / "manifest.jsonl", std::ios::binary);
  if (!manifest) throw std::runtime_error("no manifest.jsonl in " + dir);

  Dataset ds;
  bool configured = false;
  std::string line;
  int64_t lineno = 0;
  while (std::getline(manifest, line)) {
    ++lineno;
    if (line.empty()) continue;
    int64_t index = -1;
    try {
      nlohmann::json rec = nlohmann::json::parse(line);
      index = rec.at("index").get<int64_t>();

      GenParams gp;
      gp.camera = camera_from(rec.at("camera"));
      gp.z_near = rec.at("depth_range").at(0).get<double>();
      gp.z_far = rec.at("depth_range").at(1).get<double>();
      gp.depth_res = rec.at("gen").at("depth_res").get<int>();
      gp.heatmap_size = rec.at("gen").at("heatmap_size").get<int>();
      gp.heatmap_sigma = rec.at("gen").at("heatmap_sigma").get<double>();
      std::string kind = rec.at("template").at("kind").get<std::string>();
      int64_t req = rec.at("template").at("vertices").get<int64_t>();

      if (!configured) {
        ds.tmpl = make_template(kind, req);
        ds.gen = gp;
        configured = true;
      } else if (kind != ds.tmpl.kind || req != ds.tmpl.requested_vertices) {
        throw std::runtime_error("template differs from the first record");
      }

      ObjMesh mesh = load_obj((fs::path(dir) / rec.at("files").at("mesh").get<std::string>()).string());
      if (!mesh.vertices.defined() || mesh.vertices.shape() != Shape{ds.tmpl.vertex_count(), 3})
        throw std::runtime_error("mesh vertex count does not match the template");

      Derived d = derive(ds.tmpl, mesh.vertices, gp);

      RastFile img = read_rast((fs::path(dir) / rec.at("files").at("image").get<std::string>()).string());
      if (img.data != d.image) throw std::runtime_error("image raster does not match the mesh");
      RastFile hm = read_rast((fs::path(dir) / rec.at("files").at("heatmaps").get<std::string>()).string());
      if (hm.data != d.heatmaps) throw std::runtime_error("heat-map raster does not match the mesh");
      DepthMap dp = read_dpth((fs::path(dir) / rec.at("files").at("depth").get<std::string>()).string());
      {
        if (dp.width != gp.depth_res || dp.height != gp.depth_res)
          throw std::runtime_error("depth map has the wrong resolution");
        for (size_t p = 0; p < dp.values.size(); ++p) {
          if (float(d.depth.values[p]) != float(dp.values[p]))
            throw std::runtime_error("depth map does not match the mesh");
        }
      }

      Sample s;
      s.index = index;
      s.seed = rec.at("seed").get<uint64_t>();
      s.resample_attempts = rec.at("resample_attempts").get<int>();
      s.image = std::move(img.data);
      s.heatmaps = std::move(hm.data);
      s.mesh3d = mesh.vertices;
      s.mesh2d = d.mesh2d;
      s.uvd = d.uvd;
      s.joints3d = d.joints3d;
      s.depth = d.depth;  // full-precision re-render; the file is its f32 image
      s.camera = gp.camera;
      s.root_scale = d.rs;
      s.z_near = gp.z_near;
      s.z_far = gp.z_far;
      ds.samples.push_back(std::move(s));
    } catch (const std::exception& e) {
      ds.skipped.push_back({index >= 0 ? index : lineno - 1, e.what()});
    }
  }
  return ds;
}

}  // namespace meshpose
