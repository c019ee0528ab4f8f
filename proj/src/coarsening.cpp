#include "meshpose/coarsening.hpp"

#include <algorithm>
#include <stdexcept>

#include "json.hpp"

namespace meshpose {

std::vector<int64_t> graclus_match(const Adjacency& adj, int64_t* cluster_count) {
  const int64_t n = adj.size();
  std::vector<int64_t> cluster(size_t(n), -1);
  int64_t next = 0;
  for (int64_t i = 0; i < n; ++i) {
    if (cluster[size_t(i)] >= 0) continue;
    const double di = std::max(1, adj.degree(int(i)));
    int best = -1;
    double best_score = 0.0;
    for (int j : adj.neighbors[size_t(i)]) {
      if (cluster[size_t(j)] >= 0) continue;
      double score = 1.0 / di + 1.0 / std::max(1, adj.degree(j));
      if (best < 0 || score > best_score) {  // ties keep the smallest index
        best = j;
        best_score = score;
      }
    }
    cluster[size_t(i)] = next;
    if (best >= 0) cluster[size_t(best)] = next;
    ++next;
  }
  if (cluster_count) *cluster_count = next;
  return cluster;
}

namespace {

Adjacency contract(const Adjacency& fine, const std::vector<int64_t>& cluster, int64_t n_coarse) {
  std::vector<std::pair<int, int>> edges;
  for (int64_t u = 0; u < fine.size(); ++u) {
    for (int v : fine.neighbors[size_t(u)]) {
      if (v <= u) continue;
      int64_t cu = cluster[size_t(u)], cv = cluster[size_t(v)];
      if (cu != cv) edges.push_back({int(std::min(cu, cv)), int(std::max(cu, cv))});
    }
  }
  return Adjacency::from_edges(n_coarse, edges);
}

Adjacency pad_adjacency(const Adjacency& real, int64_t padded) {
  Adjacency out = real;
  out.neighbors.resize(size_t(padded));
  return out;
}

}  // namespace

CoarseningHierarchy CoarseningHierarchy::build(const Adjacency& finest, int num_levels) {
  if (num_levels < 1) throw std::invalid_argument("coarsening: num_levels must be >= 1");
  if (finest.size() == 0) throw std::invalid_argument("coarsening: graph is empty");

  // matching on the real (unpadded) graphs
  std::vector<Adjacency> real_graphs{finest};
  std::vector<std::vector<int64_t>> cluster_of;  // per level k: real fine vertex -> real coarse
  std::vector<int64_t> real_counts{finest.size()};
  for (int k = 0; k < num_levels; ++k) {
    int64_t n_coarse = 0;
    std::vector<int64_t> cl = graclus_match(real_graphs.back(), &n_coarse);
    if (n_coarse == 0) throw std::invalid_argument("coarsening: coarsest graph would be empty");
    real_graphs.push_back(contract(real_graphs.back(), cl, n_coarse));
    cluster_of.push_back(std::move(cl));
    real_counts.push_back(n_coarse);
  }

  // balanced-tree padding: the coarsest level has no fakes; each level below
  // has exactly two child slots per parent
  std::vector<int64_t> padded(size_t(num_levels) + 1);
  padded[size_t(num_levels)] = real_counts[size_t(num_levels)];
  for (int k = num_levels - 1; k >= 0; --k) padded[size_t(k)] = 2 * padded[size_t(k) + 1];

  CoarseningHierarchy h;
  h.levels_.resize(size_t(num_levels) + 1);
  for (int k = 0; k <= num_levels; ++k) {
    HierarchyLevel& lv = h.levels_[size_t(k)];
    lv.real_count = real_counts[size_t(k)];
    lv.padded_count = padded[size_t(k)];
    lv.adjacency = pad_adjacency(real_graphs[size_t(k)], lv.padded_count);
    lv.laplacian = build_laplacian_pair(lv.adjacency);
    lv.fake_mask.assign(size_t(lv.padded_count), 0);
    for (int64_t v = lv.real_count; v < lv.padded_count; ++v) lv.fake_mask[size_t(v)] = 1;
  }

  // parent/child structure, fakes allocated in ascending parent order
  for (int k = 0; k < num_levels; ++k) {
    HierarchyLevel& fine = h.levels_[size_t(k)];
    const HierarchyLevel& coarse = h.levels_[size_t(k) + 1];

    std::vector<std::vector<int64_t>> members(size_t(coarse.padded_count));
    for (int64_t v = 0; v < fine.real_count; ++v)
      members[size_t(cluster_of[size_t(k)][size_t(v)])].push_back(v);

    fine.parent_of.assign(size_t(fine.padded_count), -1);
    fine.children_of_parent.assign(size_t(coarse.padded_count), {-1, -1});
    int64_t next_fake = fine.real_count;
    for (int64_t j = 0; j < coarse.padded_count; ++j) {
      auto& slots = fine.children_of_parent[size_t(j)];
      const auto& mem = members[size_t(j)];
      slots[0] = mem.size() > 0 ? mem[0] : next_fake++;
      slots[1] = mem.size() > 1 ? mem[1] : next_fake++;
      fine.parent_of[size_t(slots[0])] = j;
      fine.parent_of[size_t(slots[1])] = j;
    }
    if (next_fake != fine.padded_count)
      throw std::logic_error("coarsening: padding bookkeeping mismatch");

    // pooling: average over real children; upsampling: broadcast to all slots
    std::vector<SparseMatrix::Triplet> pool_tri, up_tri;
    for (int64_t j = 0; j < coarse.padded_count; ++j) {
      const auto& mem = members[size_t(j)];
      if (!mem.empty()) {
        double w = 1.0 / double(mem.size());
        for (int64_t c : mem) pool_tri.push_back({j, c, w});
      }
      const auto& slots = fine.children_of_parent[size_t(j)];
      up_tri.push_back({slots[0], j, 1.0});
      up_tri.push_back({slots[1], j, 1.0});
    }
    h.pool_.push_back(SparseMatrix::from_triplets(coarse.padded_count, fine.padded_count, std::move(pool_tri)));
    h.up_.push_back(SparseMatrix::from_triplets(fine.padded_count, coarse.padded_count, std::move(up_tri)));
  }
  return h;
}

Tensor CoarseningHierarchy::pool_average(const Tensor& signal, int fine_level) const {
  if (fine_level < 0 || fine_level >= num_levels())
    throw std::invalid_argument("pool_average: no such level");
  const SparseMatrix& p = *pool_[size_t(fine_level)];
  if (signal.shape().size() != 2 || signal.shape()[0] != p.cols())
    throw std::invalid_argument("pool_average: signal has " + shape_str(signal.shape()) +
                                " but level " + std::to_string(fine_level) + " holds " +
                                std::to_string(p.cols()) + " vertices");
  Tensor out({p.rows(), signal.shape()[1]});
  p.apply(signal.data(), out.mut(), signal.shape()[1]);
  return out;
}

Tensor CoarseningHierarchy::upsample(const Tensor& signal, int coarse_level) const {
  if (coarse_level < 1 || coarse_level > num_levels())
    throw std::invalid_argument("upsample: no such level");
  const SparseMatrix& u = *up_[size_t(coarse_level) - 1];
  if (signal.shape().size() != 2 || signal.shape()[0] != u.cols())
    throw std::invalid_argument("upsample: signal has " + shape_str(signal.shape()) + " but level " +
                                std::to_string(coarse_level) + " holds " + std::to_string(u.cols()) +
                                " vertices");
  Tensor out({u.rows(), signal.shape()[1]});
  u.apply(signal.data(), out.mut(), signal.shape()[1]);
  return out;
}

std::string CoarseningHierarchy::to_json() const {
  nlohmann::json j;
  j["levels"] = nlohmann::json::array();
  for (const auto& lv : levels_) {
    nlohmann::json l;
    l["real_count"] = lv.real_count;
    l["padded_count"] = lv.padded_count;
    l["fake_mask"] = lv.fake_mask;
    if (!lv.parent_of.empty()) l["parent_of"] = lv.parent_of;
    j["levels"].push_back(std::move(l));
  }
  return j.dump(2) + "\n";
}

}  // namespace meshpose
