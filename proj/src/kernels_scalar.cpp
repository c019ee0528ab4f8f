#include "meshpose/kernels.hpp"

#include <cmath>
#include <cstring>

// Reference kernels. The AVX2 variants in kernels_avx2.cpp must match these
// bit for bit; keep loop structure and per-element operation order in sync
// when editing either file.

namespace meshpose::kernels {
namespace {

void s_add(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

void s_sub(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
}

void s_mul(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void s_scale(const double* a, double alpha, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * alpha;
}

void s_axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = y[i] + alpha * x[i];
}

void s_square(const double* a, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * a[i];
}

void s_vsqrt(const double* a, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = std::sqrt(a[i]);
}

void s_relu(const double* a, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] > 0.0 ? a[i] : 0.0;
}

void s_relu_grad(const double* x, const double* g, double* acc, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    if (x[i] > 0.0) acc[i] = acc[i] + g[i];
  }
}

void s_square_grad(const double* x, const double* g, double* acc, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) acc[i] = acc[i] + 2.0 * x[i] * g[i];
}

void s_mul_acc(const double* a, const double* b, double* acc, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) acc[i] = acc[i] + a[i] * b[i];
}

void s_smooth_l1(const double* a, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    double x = a[i];
    double ax = std::fabs(x);
    out[i] = ax < 1.0 ? 0.5 * (x * x) : ax - 0.5;
  }
}

void s_smooth_l1_grad(const double* x, const double* g, double* acc, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    double v = x[i];
    double d = std::fabs(v) < 1.0 ? v : (v > 0.0 ? 1.0 : -1.0);
    acc[i] = acc[i] + g[i] * d;
  }
}

// c = a * b, loop order i,k,j so every c[i][j] accumulates over k in
// ascending order and the inner loop streams contiguous rows of b.
void s_matmul(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  std::memset(c, 0, m * n * sizeof(double));
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    const double* arow = a + i * k;
    for (std::size_t kk = 0; kk < k; ++kk) {
      double av = arow[kk];
      const double* brow = b + kk * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] = crow[j] + av * brow[j];
    }
  }
}

// c(m x k) = a(m x n) * b(k x n)^T; c[i][kk] reduces over j in ascending order.
void s_matmul_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t n, std::size_t k) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * n;
    for (std::size_t kk = 0; kk < k; ++kk) {
      const double* brow = b + kk * n;
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc = acc + arow[j] * brow[j];
      c[i * k + kk] = acc;
    }
  }
}

// c(k x n) = a(m x k)^T * b(m x n); c[kk][j] accumulates over i in ascending order.
void s_matmul_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  std::memset(c, 0, k * n * sizeof(double));
  for (std::size_t i = 0; i < m; ++i) {
    const double* brow = b + i * n;
    const double* arow = a + i * k;
    for (std::size_t kk = 0; kk < k; ++kk) {
      double av = arow[kk];
      double* crow = c + kk * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] = crow[j] + av * brow[j];
    }
  }
}

}  // namespace

const Ops scalar_ops = {
    "scalar", s_add,        s_sub,          s_mul,    s_scale,     s_axpy,
    s_square, s_vsqrt,      s_relu,         s_relu_grad, s_square_grad, s_mul_acc,
    s_smooth_l1, s_smooth_l1_grad, s_matmul, s_matmul_nt, s_matmul_tn,
};

double reduce_sum(const double* a, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i];
  return acc;
}

}  // namespace meshpose::kernels
