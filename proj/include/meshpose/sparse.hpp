#pragma once

#include <cstdint>
#include <memory>
#include <vector>

namespace meshpose {

// Immutable CSR matrix with a precomputed transpose, used for graph
// Laplacians and the pooling/upsampling maps. apply() accumulates each
// output row over column-sorted entries, so results are deterministic.
class SparseMatrix {
 public:
  struct Triplet {
    int64_t r, c;
    double v;
  };

  static std::shared_ptr<const SparseMatrix> from_triplets(int64_t rows, int64_t cols,
                                                           std::vector<Triplet> entries);

  int64_t rows() const { return rows_; }
  int64_t cols() const { return cols_; }
  int64_t nnz() const { return int64_t(vals_.size()); }

  // out(rows x width) = S * f(cols x width); out is overwritten
  void apply(const double* f, double* out, int64_t width) const;
  // out(cols x width) = S^T * g(rows x width)
  void apply_transpose(const double* g, double* out, int64_t width) const;

  // entry access for tests/serialization (row-sorted, column-sorted within row)
  const std::vector<int64_t>& row_ptr() const { return row_ptr_; }
  const std::vector<int64_t>& col_idx() const { return col_idx_; }
  const std::vector<double>& values() const { return vals_; }

  double at(int64_t r, int64_t c) const;  // 0 when absent
  bool is_symmetric_bitwise() const;

 private:
  int64_t rows_ = 0, cols_ = 0;
  std::vector<int64_t> row_ptr_, col_idx_;
  std::vector<double> vals_;
  std::vector<int64_t> t_row_ptr_, t_col_idx_;
  std::vector<double> t_vals_;
};

using SparsePtr = std::shared_ptr<const SparseMatrix>;

}  // namespace meshpose
