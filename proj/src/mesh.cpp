#include "meshpose/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "meshpose/rng.hpp"

namespace meshpose {

MeshTopology::MeshTopology(int64_t vertex_count, std::vector<std::array<int, 3>> faces)
    : n_(vertex_count), faces_(std::move(faces)) {
  if (n_ <= 0) throw std::invalid_argument("mesh: vertex count must be positive");
  for (const auto& f : faces_) {
    for (int v : f) {
      if (v < 0 || v >= n_)
        throw std::invalid_argument("mesh: face index " + std::to_string(v) + " out of range for " +
                                    std::to_string(n_) + " vertices");
    }
    if (f[0] == f[1] || f[1] == f[2] || f[0] == f[2])
      throw std::invalid_argument("mesh: degenerate face with repeated vertex index");
  }
  std::vector<std::pair<int, int>> all;
  all.reserve(faces_.size() * 3);
  for (const auto& f : faces_) {
    all.push_back({std::min(f[0], f[1]), std::max(f[0], f[1])});
    all.push_back({std::min(f[1], f[2]), std::max(f[1], f[2])});
    all.push_back({std::min(f[0], f[2]), std::max(f[0], f[2])});
  }
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());
  edges_ = std::move(all);

  neighbors_.resize(size_t(n_));
  for (const auto& [i, j] : edges_) {
    neighbors_[size_t(i)].push_back(j);
    neighbors_[size_t(j)].push_back(i);
  }
  for (auto& nb : neighbors_) std::sort(nb.begin(), nb.end());
}

bool Adjacency::has_edge(int i, int j) const {
  const auto& nb = neighbors[size_t(i)];
  return std::binary_search(nb.begin(), nb.end(), j);
}

int64_t Adjacency::edge_count() const {
  int64_t c = 0;
  for (const auto& nb : neighbors) c += int64_t(nb.size());
  return c / 2;
}

Adjacency Adjacency::from_edges(int64_t n, const std::vector<std::pair<int, int>>& edges) {
  Adjacency adj;
  adj.neighbors.resize(size_t(n));
  for (auto [i, j] : edges) {
    if (i == j) throw std::invalid_argument("adjacency: self-loop not allowed");
    if (i < 0 || j < 0 || i >= n || j >= n) throw std::invalid_argument("adjacency: edge index out of range");
    adj.neighbors[size_t(i)].push_back(j);
    adj.neighbors[size_t(j)].push_back(i);
  }
  for (auto& nb : adj.neighbors) {
    std::sort(nb.begin(), nb.end());
    nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
  }
  return adj;
}

Adjacency build_adjacency(const MeshTopology& topo) {
  return Adjacency::from_edges(topo.vertex_count(), topo.edges());
}

SparsePtr normalized_laplacian(const Adjacency& adj) {
  const int64_t n = adj.size();
  std::vector<double> dinvsqrt(size_t(n), 0.0);
  for (int64_t v = 0; v < n; ++v) {
    int d = adj.degree(int(v));
    if (d > 0) dinvsqrt[size_t(v)] = 1.0 / std::sqrt(double(d));
  }
  std::vector<SparseMatrix::Triplet> tri;
  for (int64_t v = 0; v < n; ++v) {
    if (adj.degree(int(v)) > 0) tri.push_back({v, v, 1.0});
  }
  // each undirected edge contributes one computed weight, assigned to both
  // sides, so L is symmetric bit for bit
  for (int64_t i = 0; i < n; ++i) {
    for (int j : adj.neighbors[size_t(i)]) {
      if (j <= i) continue;
      double w = -(dinvsqrt[size_t(i)] * dinvsqrt[size_t(j)]);
      tri.push_back({i, j, w});
      tri.push_back({int64_t(j), i, w});
    }
  }
  return SparseMatrix::from_triplets(n, n, std::move(tri));
}

MaxEigResult max_eigenvalue(const SparseMatrix& l) {
  if (l.rows() != l.cols()) throw std::invalid_argument("max_eigenvalue: matrix must be square");
  const int64_t n = l.rows();
  constexpr int kMaxIters = 200;
  constexpr double kTol = 1e-8;

  // fixed pseudo-random start so no eigenvector is exactly missed
  SplitMix64 rng(0x9e3779b97f4a7c15ull);
  std::vector<double> x(static_cast<size_t>(n));
  double norm = 0;
  for (auto& v : x) {
    v = rng.uniform(-1.0, 1.0);
    norm += v * v;
  }
  norm = std::sqrt(norm);
  for (auto& v : x) v /= norm;

  std::vector<double> y(static_cast<size_t>(n));
  double rayleigh = 0.0;
  double prev = 0.0;
  for (int it = 0; it < kMaxIters; ++it) {
    l.apply(x.data(), y.data(), 1);
    double yx = 0, ynorm = 0;
    for (int64_t i = 0; i < n; ++i) {
      yx += y[size_t(i)] * x[size_t(i)];
      ynorm += y[size_t(i)] * y[size_t(i)];
    }
    ynorm = std::sqrt(ynorm);
    rayleigh = yx;  // x is unit
    if (ynorm < 1e-12) return {2.0, true};  // (near-)nilpotent action, e.g. zero matrix
    for (int64_t i = 0; i < n; ++i) x[size_t(i)] = y[size_t(i)] / ynorm;
    if (it > 0 && std::fabs(rayleigh - prev) < kTol) return {rayleigh, false};
    prev = rayleigh;
  }
  return {2.0, true};  // did not converge within the cap
}

SparsePtr rescale_laplacian(const SparseMatrix& l, double lambda_max) {
  if (!(lambda_max > 0)) throw std::invalid_argument("rescale_laplacian: lambda_max must be positive");
  const int64_t n = l.rows();
  const double s = 2.0 / lambda_max;
  std::vector<SparseMatrix::Triplet> tri;
  std::vector<bool> diag_seen(size_t(n), false);
  for (int64_t r = 0; r < n; ++r) {
    for (int64_t p = l.row_ptr()[size_t(r)]; p < l.row_ptr()[size_t(r) + 1]; ++p) {
      int64_t c = l.col_idx()[size_t(p)];
      double v = l.values()[size_t(p)] * s;
      if (c == r) {
        v -= 1.0;
        diag_seen[size_t(r)] = true;
      }
      tri.push_back({r, c, v});
    }
    if (!diag_seen[size_t(r)]) tri.push_back({r, r, -1.0});
  }
  return SparseMatrix::from_triplets(n, n, std::move(tri));
}

LaplacianPair build_laplacian_pair(const Adjacency& adj) {
  LaplacianPair lp;
  lp.laplacian = normalized_laplacian(adj);
  MaxEigResult me = max_eigenvalue(*lp.laplacian);
  lp.lambda_max = me.value;
  lp.lambda_fallback = me.fallback;
  lp.rescaled = rescale_laplacian(*lp.laplacian, lp.lambda_max);
  return lp;
}

ObjMesh parse_obj(const std::string& text) {
  std::vector<double> verts;
  std::vector<std::array<int, 3>> faces;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag)) continue;
    if (tag == "v") {
      double x, y, z;
      if (!(ls >> x >> y >> z))
        throw std::runtime_error("obj: malformed vertex at line " + std::to_string(lineno));
      verts.push_back(x);
      verts.push_back(y);
      verts.push_back(z);
    } else if (tag == "f") {
      std::vector<int> idx;
      std::string tok;
      while (ls >> tok) {
        // take the position index, ignore /vt/vn
        size_t slash = tok.find('/');
        std::string head = slash == std::string::npos ? tok : tok.substr(0, slash);
        int v = std::stoi(head);
        if (v <= 0) throw std::runtime_error("obj: face indices must be positive (line " +
                                             std::to_string(lineno) + ")");
        idx.push_back(v - 1);
      }
      if (idx.size() != 3)
        throw std::runtime_error("obj: only triangle faces supported (line " + std::to_string(lineno) + ")");
      faces.push_back({idx[0], idx[1], idx[2]});
    }
    // all other record types ignored
  }
  int64_t n = int64_t(verts.size()) / 3;
  for (const auto& f : faces) {
    for (int v : f) {
      if (v >= n) throw std::runtime_error("obj: face references vertex " + std::to_string(v + 1) +
                                           " but only " + std::to_string(n) + " vertices present");
    }
  }
  ObjMesh m;
  m.vertices = n > 0 ? Tensor({n, 3}, std::move(verts)) : Tensor();
  m.faces = std::move(faces);
  return m;
}

ObjMesh load_obj(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open obj file " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_obj(text);
}

std::string obj_to_text(const Tensor& vertices, const std::vector<std::array<int, 3>>& faces) {
  if (vertices.shape().size() != 2 || vertices.shape()[1] != 3)
    throw std::invalid_argument("obj: vertices must be Nx3");
  std::string out;
  char buf[128];
  const double* v = vertices.data();
  for (int64_t i = 0; i < vertices.shape()[0]; ++i) {
    // %.17g round-trips doubles exactly
    std::snprintf(buf, sizeof(buf), "v %.17g %.17g %.17g\n", v[i * 3], v[i * 3 + 1], v[i * 3 + 2]);
    out += buf;
  }
  for (const auto& f : faces) {
    std::snprintf(buf, sizeof(buf), "f %d %d %d\n", f[0] + 1, f[1] + 1, f[2] + 1);
    out += buf;
  }
  return out;
}

void save_obj(const Tensor& vertices, const std::vector<std::array<int, 3>>& faces,
              const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write obj file " + path);
  out << obj_to_text(vertices, faces);
}

}  // namespace meshpose
