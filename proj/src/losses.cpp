#include "meshpose/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace meshpose {

std::shared_ptr<const LossGeometry> LossGeometry::build(std::shared_ptr<const MeshTopology> topo) {
  auto g = std::make_shared<LossGeometry>();
  g->topology = topo;
  const int64_t n = topo->vertex_count();

  std::vector<int64_t> ei, ej;
  for (const auto& [i, j] : topo->edges()) {
    ei.push_back(i);
    ej.push_back(j);
  }
  if (!ei.empty()) {
    g->edge_i = IndexPlan::rows({n, 3}, ei);
    g->edge_j = IndexPlan::rows({n, 3}, ej);
  }

  std::vector<int64_t> fa, fb;
  for (const auto& f : topo->faces()) {
    // directed edges (a,b), (b,c), (c,a)
    fa.push_back(f[0]);
    fb.push_back(f[1]);
    fa.push_back(f[1]);
    fb.push_back(f[2]);
    fa.push_back(f[2]);
    fb.push_back(f[0]);
  }
  if (!fa.empty()) {
    g->face_e_a = IndexPlan::rows({n, 3}, fa);
    g->face_e_b = IndexPlan::rows({n, 3}, fb);
  }

  std::vector<SparseMatrix::Triplet> tri;
  for (int64_t v = 0; v < n; ++v) {
    const auto& nb = topo->neighbors()[size_t(v)];
    if (nb.empty()) continue;
    double w = 1.0 / double(nb.size());
    for (int u : nb) tri.push_back({v, int64_t(u), w});
  }
  g->neighbor_mean = SparseMatrix::from_triplets(n, n, std::move(tri));
  return g;
}

MeshTruth MeshTruth::build(std::shared_ptr<const LossGeometry> geo, Tensor v3d, Tensor v2d) {
  const auto& topo = *geo->topology;
  const int64_t n = topo.vertex_count();
  if (v3d.shape() != Shape{n, 3})
    throw std::invalid_argument("mesh truth: v3d must be " + std::to_string(n) + "x3, got " +
                                shape_str(v3d.shape()));
  if (v2d.shape() != Shape{n, 2})
    throw std::invalid_argument("mesh truth: v2d must be " + std::to_string(n) + "x2, got " +
                                shape_str(v2d.shape()));

  MeshTruth mt;
  mt.geo = std::move(geo);
  mt.v3d = std::move(v3d);
  mt.v2d = std::move(v2d);

  const double* v = mt.v3d.data();
  const auto& faces = topo.faces();
  if (faces.empty()) return mt;
  mt.edge_normals = Tensor({int64_t(faces.size()) * 3, 3});
  double* en = mt.edge_normals.mut();
  for (size_t f = 0; f < faces.size(); ++f) {
    const double* a = v + faces[f][0] * 3;
    const double* b = v + faces[f][1] * 3;
    const double* c = v + faces[f][2] * 3;
    double u[3] = {b[0] - a[0], b[1] - a[1], b[2] - a[2]};
    double w[3] = {c[0] - a[0], c[1] - a[1], c[2] - a[2]};
    double nx = u[1] * w[2] - u[2] * w[1];
    double ny = u[2] * w[0] - u[0] * w[2];
    double nz = u[0] * w[1] - u[1] * w[0];
    double norm = std::sqrt(nx * nx + ny * ny + nz * nz);
    if (norm < 1e-12) {
      mt.degenerate_faces++;  // rows stay zero: the face contributes nothing
      continue;
    }
    for (int e = 0; e < 3; ++e) {
      en[(f * 3 + e) * 3 + 0] = nx / norm;
      en[(f * 3 + e) * 3 + 1] = ny / norm;
      en[(f * 3 + e) * 3 + 2] = nz / norm;
    }
  }

  const auto& edges = topo.edges();
  if (!edges.empty()) {
    mt.edge_sq = Tensor({int64_t(edges.size()), 1});
    double* es = mt.edge_sq.mut();
    for (size_t e = 0; e < edges.size(); ++e) {
      const double* i = v + edges[e].first * 3;
      const double* j = v + edges[e].second * 3;
      double dx = i[0] - j[0], dy = i[1] - j[1], dz = i[2] - j[2];
      es[e] = dx * dx + dy * dy + dz * dz;
    }
  }
  return mt;
}

void LossWeights::validate() const {
  for (double w : {lambda_v, lambda_n, lambda_e, lambda_l, lambda_h, lambda_m, lambda_j,
                   weak_lambda_h, weak_lambda_d, weak_lambda_pm, weak_lambda_j}) {
    if (!(w >= 0.0) || !std::isfinite(w))
      throw std::invalid_argument("loss weights must be finite and nonnegative");
  }
}

namespace {

Value sq_diff_sum(Tape& t, const Tensor& gt, Value est) {
  if (t.val(est).shape() != gt.shape())
    throw std::invalid_argument("loss: shapes differ: " + shape_str(gt.shape()) + " vs " +
                                shape_str(t.val(est).shape()));
  return t.reduce_sum(t.square(t.sub(t.constant(gt), est)));
}

// row sums of an R x 3 tensor via matmul with a ones column
Value row_sum3(Tape& t, Value x) {
  return t.matmul(x, t.constant(Tensor({3, 1}, {1, 1, 1})));
}

}  // namespace

Value heatmap_loss(Tape& t, const Tensor& gt, Value est) { return sq_diff_sum(t, gt, est); }

Value vertex_loss(Tape& t, const MeshTruth& truth, const MeshEstimate& est) {
  return t.add(sq_diff_sum(t, truth.v3d, est.v3d), sq_diff_sum(t, truth.v2d, est.v2d));
}

Value normal_loss(Tape& t, const MeshTruth& truth, const MeshEstimate& est) {
  if (t.val(est.v3d).shape() != truth.v3d.shape())
    throw std::invalid_argument("normal_loss: vertex shape mismatch");
  if (!truth.geo->face_e_a) return t.constant(Tensor::scalar(0.0));
  Value ea = t.gather(est.v3d, truth.geo->face_e_a);
  Value eb = t.gather(est.v3d, truth.geo->face_e_b);
  Value d = t.sub(ea, eb);
  Value dots = row_sum3(t, t.mul(d, t.constant(truth.edge_normals)));
  return t.reduce_sum(t.square(dots));
}

Value edge_loss(Tape& t, const MeshTruth& truth, const MeshEstimate& est) {
  if (t.val(est.v3d).shape() != truth.v3d.shape())
    throw std::invalid_argument("edge_loss: vertex shape mismatch");
  if (!truth.geo->edge_i) return t.constant(Tensor::scalar(0.0));
  Value ev = t.sub(t.gather(est.v3d, truth.geo->edge_i), t.gather(est.v3d, truth.geo->edge_j));
  Value est_sq = row_sum3(t, t.square(ev));
  return t.reduce_sum(t.square(t.sub(t.constant(truth.edge_sq), est_sq)));
}

Value laplacian_loss(Tape& t, const MeshTruth& truth, const MeshEstimate& est) {
  if (t.val(est.v3d).shape() != truth.v3d.shape())
    throw std::invalid_argument("laplacian_loss: vertex shape mismatch");
  Value delta = t.sub(t.constant(truth.v3d), est.v3d);
  Value mean = t.sparse_apply(truth.geo->neighbor_mean, delta);
  return t.reduce_sum(t.square(t.sub(delta, mean)));
}

Value pose_loss(Tape& t, const Tensor& gt_joints, Value est_joints) {
  return sq_diff_sum(t, gt_joints, est_joints);
}

Value mesh_loss(Tape& t, const MeshTruth& truth, const MeshEstimate& est, const LossWeights& w) {
  w.validate();
  Value acc = t.constant(Tensor::scalar(0.0));
  if (w.lambda_v > 0) acc = t.add(acc, t.scale(vertex_loss(t, truth, est), w.lambda_v));
  if (w.lambda_n > 0) acc = t.add(acc, t.scale(normal_loss(t, truth, est), w.lambda_n));
  if (w.lambda_e > 0) acc = t.add(acc, t.scale(edge_loss(t, truth, est), w.lambda_e));
  if (w.lambda_l > 0) acc = t.add(acc, t.scale(laplacian_loss(t, truth, est), w.lambda_l));
  return acc;
}

Value fully_loss(Tape& t, Value heat, Value mesh, Value pose, const LossWeights& w) {
  w.validate();
  Value acc = t.scale(heat, w.lambda_h);
  acc = t.add(acc, t.scale(mesh, w.lambda_m));
  acc = t.add(acc, t.scale(pose, w.lambda_j));
  return acc;
}

Value depth_loss(Tape& t, const DepthMap& reference, Value rendered) {
  const Tensor& r = t.val(rendered);
  if (r.shape() != Shape{int64_t(reference.height), int64_t(reference.width)})
    throw std::invalid_argument("depth_loss: rendered map is " + shape_str(r.shape()) +
                                " but reference is " + std::to_string(reference.height) + "x" +
                                std::to_string(reference.width));
  // union of foreground masks, frozen for this evaluation
  std::vector<int64_t> masked;
  const double* rv = r.data();
  for (size_t p = 0; p < reference.values.size(); ++p) {
    if (reference.values[p] < 1.0 || rv[p] < 1.0) masked.push_back(int64_t(p));
  }
  if (masked.empty()) return t.constant(Tensor::scalar(0.0));

  Tensor ref({int64_t(reference.height), int64_t(reference.width)},
             std::vector<double>(reference.values));
  Value diff = t.sub(rendered, t.constant(ref));
  auto plan = std::make_shared<IndexPlan>();
  plan->in_shape = r.shape();
  plan->out_shape = {int64_t(masked.size()), 1};
  plan->idx = std::move(masked);
  Value sel = t.gather(diff, plan);
  return t.scale(t.reduce_sum(t.smooth_l1(sel)), 1.0 / double(plan->idx.size()));
}

Value pseudo_mesh_loss(Tape& t, const MeshTruth& pseudo, const MeshEstimate& est,
                       const LossWeights& w) {
  w.validate();
  Value acc = t.constant(Tensor::scalar(0.0));
  if (w.lambda_e > 0) acc = t.add(acc, t.scale(edge_loss(t, pseudo, est), w.lambda_e));
  if (w.lambda_l > 0) acc = t.add(acc, t.scale(laplacian_loss(t, pseudo, est), w.lambda_l));
  return acc;
}

Value weakly_loss(Tape& t, Value heat, Value depth, Value pseudo, std::optional<Value> pose,
                  const LossWeights& w) {
  w.validate();
  Value acc = t.scale(heat, w.weak_lambda_h);
  acc = t.add(acc, t.scale(depth, w.weak_lambda_d));
  acc = t.add(acc, t.scale(pseudo, w.weak_lambda_pm));
  if (pose) acc = t.add(acc, t.scale(*pose, w.weak_lambda_j));
  return acc;
}

Tensor make_gaussian_heatmaps(const Tensor& joints_uv, int size, double sigma) {
  if (joints_uv.shape().size() != 2 || joints_uv.shape()[1] < 2)
    throw std::invalid_argument("heatmaps: joints must be Jx2 (or wider)");
  const int64_t j = joints_uv.shape()[0];
  const int64_t cols = joints_uv.shape()[1];
  Tensor hm({j, int64_t(size), int64_t(size)});
  double* d = hm.mut();
  const double inv = 1.0 / (2.0 * sigma * sigma);
  for (int64_t ji = 0; ji < j; ++ji) {
    double u = joints_uv.data()[ji * cols + 0];
    double v = joints_uv.data()[ji * cols + 1];
    // peak-1 Gaussian centered on the joint's pixel
    int64_t px = std::clamp(int64_t(std::floor(u * size)), int64_t(0), int64_t(size - 1));
    int64_t py = std::clamp(int64_t(std::floor(v * size)), int64_t(0), int64_t(size - 1));
    for (int64_t y = 0; y < size; ++y)
      for (int64_t x = 0; x < size; ++x) {
        double dx = double(x - px), dy = double(y - py);
        d[ji * size * size + y * size + x] = std::exp(-(dx * dx + dy * dy) * inv);
      }
  }
  return hm;
}

}  // namespace meshpose
