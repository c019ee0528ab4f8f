#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "meshpose/sparse.hpp"
#include "meshpose/tensor.hpp"

namespace meshpose {

// Fixed triangle-mesh topology. Immutable after construction; the edge set
// and sorted neighbor lists are derived once.
class MeshTopology {
 public:
  MeshTopology(int64_t vertex_count, std::vector<std::array<int, 3>> faces);

  int64_t vertex_count() const { return n_; }
  const std::vector<std::array<int, 3>>& faces() const { return faces_; }
  const std::vector<std::pair<int, int>>& edges() const { return edges_; }  // i < j, unique
  const std::vector<std::vector<int>>& neighbors() const { return neighbors_; }
  int degree(int v) const { return int(neighbors_[size_t(v)].size()); }

 private:
  int64_t n_;
  std::vector<std::array<int, 3>> faces_;
  std::vector<std::pair<int, int>> edges_;
  std::vector<std::vector<int>> neighbors_;
};

// Binary adjacency stored as sorted neighbor lists; symmetric with an empty
// diagonal by construction.
struct Adjacency {
  std::vector<std::vector<int>> neighbors;

  int64_t size() const { return int64_t(neighbors.size()); }
  int degree(int v) const { return int(neighbors[size_t(v)].size()); }
  bool has_edge(int i, int j) const;
  int64_t edge_count() const;

  static Adjacency from_edges(int64_t n, const std::vector<std::pair<int, int>>& edges);
};

Adjacency build_adjacency(const MeshTopology& topo);

struct LaplacianPair {
  SparsePtr laplacian;  // normalized: I - D^{-1/2} W D^{-1/2}, zero rows for isolated vertices
  SparsePtr rescaled;   // 2 L / lambda_max - I
  double lambda_max = 0.0;
  bool lambda_fallback = false;  // power iteration degenerate, fell back to the bound 2
};

SparsePtr normalized_laplacian(const Adjacency& adj);

struct MaxEigResult {
  double value = 0.0;
  bool fallback = false;
};

// Power iteration (200 iterations max, 1e-8 Rayleigh-quotient tolerance) with
// a fixed pseudo-random start vector; degenerate cases fall back to 2, the
// universal bound for normalized Laplacians.
MaxEigResult max_eigenvalue(const SparseMatrix& l);

SparsePtr rescale_laplacian(const SparseMatrix& l, double lambda_max);

LaplacianPair build_laplacian_pair(const Adjacency& adj);

// Wavefront OBJ with `v` and `f` records only; face indices are 1-based and
// may carry /vt/vn suffixes, which are ignored.
struct ObjMesh {
  Tensor vertices;  // N x 3
  std::vector<std::array<int, 3>> faces;
};

ObjMesh load_obj(const std::string& path);
ObjMesh parse_obj(const std::string& text);
void save_obj(const Tensor& vertices, const std::vector<std::array<int, 3>>& faces,
              const std::string& path);
std::string obj_to_text(const Tensor& vertices, const std::vector<std::array<int, 3>>& faces);

}  // namespace meshpose
