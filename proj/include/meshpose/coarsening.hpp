#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "meshpose/mesh.hpp"
#include "meshpose/sparse.hpp"
#include "meshpose/tensor.hpp"

namespace meshpose {

// One level of the coarsening hierarchy. Vertex indices below real_count are
// real; the remainder are isolated padding vertices added so every parent
// has exactly two child slots in the level below.
struct HierarchyLevel {
  int64_t real_count = 0;
  int64_t padded_count = 0;
  Adjacency adjacency;           // padded; fake vertices have no edges
  LaplacianPair laplacian;      // built on the padded graph
  std::vector<int8_t> fake_mask;  // 1 = padding vertex

  // maps to the level above (absent on the coarsest level)
  std::vector<int64_t> parent_of;                 // size padded_count
  // children of each vertex of the level above: exactly 2 slots each
  std::vector<std::array<int64_t, 2>> children_of_parent;
};

class CoarseningHierarchy {
 public:
  // Graclus-style greedy matching, one call per hierarchy.
  static CoarseningHierarchy build(const Adjacency& finest, int num_levels);

  int num_levels() const { return int(levels_.size()) - 1; }  // coarsening steps
  const HierarchyLevel& level(int k) const { return levels_.at(size_t(k)); }
  const std::vector<HierarchyLevel>& levels() const { return levels_; }

  // average over real children; fake parents and fake children contribute 0
  const SparsePtr& pool_matrix(int fine_level) const { return pool_.at(size_t(fine_level)); }
  // every child (real or fake) receives a copy of its parent feature
  const SparsePtr& upsample_matrix(int fine_level) const { return up_.at(size_t(fine_level)); }

  Tensor pool_average(const Tensor& signal, int fine_level) const;
  Tensor upsample(const Tensor& signal, int coarse_level) const;

  std::string to_json() const;

 private:
  std::vector<HierarchyLevel> levels_;
  std::vector<SparsePtr> pool_;  // pool_[k]: level k -> level k+1
  std::vector<SparsePtr> up_;    // up_[k]: level k+1 -> level k
};

// Greedy matching pass used by the hierarchy; exposed for tests. Vertices
// are visited in ascending index order; an unmarked vertex pairs with the
// unmarked neighbor maximizing w_ij*(1/d_i + 1/d_j), ties broken by the
// smallest index, or stays a singleton. Returns cluster id per vertex;
// cluster ids count up in order of creation.
std::vector<int64_t> graclus_match(const Adjacency& adj, int64_t* cluster_count);

}  // namespace meshpose
