#pragma once

#include <memory>
#include <optional>

#include "meshpose/mesh.hpp"
#include "meshpose/render.hpp"
#include "meshpose/tape.hpp"

namespace meshpose {

// Topology-derived pieces shared by every loss evaluation on a fixed mesh:
// edge endpoint gathers, per-face directed-edge gathers and the
// neighbor-mean operator (zero rows for isolated vertices).
struct LossGeometry {
  std::shared_ptr<const MeshTopology> topology;
  IndexPlanPtr edge_i, edge_j;      // E x 3 row gathers
  IndexPlanPtr face_e_a, face_e_b;  // 3F x 3 row gathers, directed edges (a,b),(b,c),(c,a)
  SparsePtr neighbor_mean;          // N x N, row i: 1/B_i on neighbors

  static std::shared_ptr<const LossGeometry> build(std::shared_ptr<const MeshTopology> topo);
};

// Ground-truth side of the mesh losses; face normals are unit vectors
// computed from the ground-truth vertices, degenerate faces are skipped and
// tallied.
struct MeshTruth {
  std::shared_ptr<const LossGeometry> geo;
  Tensor v3d;  // N x 3
  Tensor v2d;  // N x 2
  Tensor edge_normals;  // 3F x 3: each face's unit normal on its 3 edge rows
  Tensor edge_sq;       // E x 1 squared ground-truth edge lengths
  int degenerate_faces = 0;

  static MeshTruth build(std::shared_ptr<const LossGeometry> geo, Tensor v3d, Tensor v2d);
};

struct MeshEstimate {
  Value v3d;  // N x 3
  Value v2d;  // N x 2
};

struct LossWeights {
  // mesh loss terms
  double lambda_v = 1.0, lambda_n = 1.0, lambda_e = 1.0, lambda_l = 50.0;
  // fully-supervised combination
  double lambda_h = 0.5, lambda_m = 1.0, lambda_j = 1.0;
  // weakly-supervised combination
  double weak_lambda_h = 0.1, weak_lambda_d = 0.1, weak_lambda_pm = 1.0, weak_lambda_j = 10.0;

  void validate() const;  // all finite and >= 0
};

// sum_j ||H_j - H^_j||^2 over all pixels
Value heatmap_loss(Tape& t, const Tensor& gt, Value est);
// sum_i ||v3d - v^3d||^2 + ||v2d - v^2d||^2
Value vertex_loss(Tape& t, const MeshTruth& truth, const MeshEstimate& est);
// sum over faces and their 3 directed edges of <e^, n_gt>^2
Value normal_loss(Tape& t, const MeshTruth& truth, const MeshEstimate& est);
// sum over edges of (||e||^2 - ||e^||^2)^2
Value edge_loss(Tape& t, const MeshTruth& truth, const MeshEstimate& est);
// sum_i ||delta_i - mean_{k in N(i)} delta_k||^2 with delta = v_gt - v^
Value laplacian_loss(Tape& t, const MeshTruth& truth, const MeshEstimate& est);
// sum_j ||phi_j - phi^_j||^2
Value pose_loss(Tape& t, const Tensor& gt_joints, Value est_joints);

Value mesh_loss(Tape& t, const MeshTruth& truth, const MeshEstimate& est, const LossWeights& w);
Value fully_loss(Tape& t, Value heat, Value mesh, Value pose, const LossWeights& w);

// masked mean of elementwise smooth-L1(beta=1); the mask is the union of
// reference and rendered foreground pixels, frozen at evaluation time
Value depth_loss(Tape& t, const DepthMap& reference, Value rendered);

// edge + laplacian terms only, against the pseudo-ground-truth mesh
Value pseudo_mesh_loss(Tape& t, const MeshTruth& pseudo, const MeshEstimate& est,
                       const LossWeights& w);
Value weakly_loss(Tape& t, Value heat, Value depth, Value pseudo, std::optional<Value> pose,
                  const LossWeights& w);

// ground-truth heat-map construction: unnormalized Gaussian with peak 1 at
// the joint pixel, sigma in pixels on a size x size grid
Tensor make_gaussian_heatmaps(const Tensor& joints_uv, int size, double sigma);

}  // namespace meshpose
