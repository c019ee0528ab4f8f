#include "meshpose/sparse.hpp"

#include <algorithm>
#include <cstring>
#include <stdexcept>

#include "meshpose/kernels.hpp"

namespace meshpose {

std::shared_ptr<const SparseMatrix> SparseMatrix::from_triplets(int64_t rows, int64_t cols,
                                                                std::vector<Triplet> entries) {
  auto m = std::make_shared<SparseMatrix>();
  m->rows_ = rows;
  m->cols_ = cols;
  for (const auto& t : entries) {
    if (t.r < 0 || t.r >= rows || t.c < 0 || t.c >= cols)
      throw std::invalid_argument("sparse triplet out of bounds");
  }
  std::sort(entries.begin(), entries.end(), [](const Triplet& a, const Triplet& b) {
    return a.r != b.r ? a.r < b.r : a.c < b.c;
  });
  for (size_t i = 1; i < entries.size(); ++i) {
    if (entries[i].r == entries[i - 1].r && entries[i].c == entries[i - 1].c)
      throw std::invalid_argument("duplicate sparse triplet");
  }

  m->row_ptr_.assign(size_t(rows) + 1, 0);
  m->col_idx_.reserve(entries.size());
  m->vals_.reserve(entries.size());
  for (const auto& t : entries) {
    m->row_ptr_[size_t(t.r) + 1]++;
    m->col_idx_.push_back(t.c);
    m->vals_.push_back(t.v);
  }
  for (int64_t r = 0; r < rows; ++r) m->row_ptr_[size_t(r) + 1] += m->row_ptr_[size_t(r)];

  // transposed copy
  for (auto& t : entries) std::swap(t.r, t.c);
  std::sort(entries.begin(), entries.end(), [](const Triplet& a, const Triplet& b) {
    return a.r != b.r ? a.r < b.r : a.c < b.c;
  });
  m->t_row_ptr_.assign(size_t(cols) + 1, 0);
  m->t_col_idx_.reserve(entries.size());
  m->t_vals_.reserve(entries.size());
  for (const auto& t : entries) {
    m->t_row_ptr_[size_t(t.r) + 1]++;
    m->t_col_idx_.push_back(t.c);
    m->t_vals_.push_back(t.v);
  }
  for (int64_t r = 0; r < cols; ++r) m->t_row_ptr_[size_t(r) + 1] += m->t_row_ptr_[size_t(r)];
  return m;
}

void SparseMatrix::apply(const double* f, double* out, int64_t width) const {
  const auto& k = kernels::active();
  std::memset(out, 0, size_t(rows_) * size_t(width) * sizeof(double));
  for (int64_t r = 0; r < rows_; ++r) {
    double* orow = out + r * width;
    for (int64_t p = row_ptr_[size_t(r)]; p < row_ptr_[size_t(r) + 1]; ++p) {
      k.axpy(vals_[size_t(p)], f + col_idx_[size_t(p)] * width, orow, size_t(width));
    }
  }
}

void SparseMatrix::apply_transpose(const double* g, double* out, int64_t width) const {
  const auto& k = kernels::active();
  std::memset(out, 0, size_t(cols_) * size_t(width) * sizeof(double));
  for (int64_t r = 0; r < cols_; ++r) {
    double* orow = out + r * width;
    for (int64_t p = t_row_ptr_[size_t(r)]; p < t_row_ptr_[size_t(r) + 1]; ++p) {
      k.axpy(t_vals_[size_t(p)], g + t_col_idx_[size_t(p)] * width, orow, size_t(width));
    }
  }
}

double SparseMatrix::at(int64_t r, int64_t c) const {
  if (r < 0 || r >= rows_ || c < 0 || c >= cols_) throw std::out_of_range("sparse index");
  for (int64_t p = row_ptr_[size_t(r)]; p < row_ptr_[size_t(r) + 1]; ++p) {
    if (col_idx_[size_t(p)] == c) return vals_[size_t(p)];
  }
  return 0.0;
}

bool SparseMatrix::is_symmetric_bitwise() const {
  if (rows_ != cols_) return false;
  return col_idx_ == t_col_idx_ && row_ptr_ == t_row_ptr_ &&
         std::memcmp(vals_.data(), t_vals_.data(), vals_.size() * sizeof(double)) == 0;
}

}  // namespace meshpose
