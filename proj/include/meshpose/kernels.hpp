#pragma once

#include <cstddef>

namespace meshpose::kernels {

// Dense f64 inner loops. Two implementations exist: a scalar reference and
// an AVX2 variant selected at runtime. Both produce bit-identical results:
// the AVX2 kernels vectorize only across independent output elements and
// keep the per-element operation order of the scalar reference (no FMA, no
// reassociated reductions), so golden files and determinism checks do not
// depend on the selected backend.
struct Ops {
  const char* name;

  void (*add)(const double* a, const double* b, double* out, std::size_t n);
  void (*sub)(const double* a, const double* b, double* out, std::size_t n);
  void (*mul)(const double* a, const double* b, double* out, std::size_t n);
  void (*scale)(const double* a, double alpha, double* out, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  void (*square)(const double* a, double* out, std::size_t n);
  void (*vsqrt)(const double* a, double* out, std::size_t n);
  void (*relu)(const double* a, double* out, std::size_t n);
  // acc += g * (x > 0)
  void (*relu_grad)(const double* x, const double* g, double* acc, std::size_t n);
  // acc += 2 * x * g
  void (*square_grad)(const double* x, const double* g, double* acc, std::size_t n);
  // acc += a * b
  void (*mul_acc)(const double* a, const double* b, double* acc, std::size_t n);
  // elementwise smooth-L1 with beta = 1: 0.5*x^2 for |x| < 1, |x| - 0.5 otherwise
  void (*smooth_l1)(const double* a, double* out, std::size_t n);
  // acc += g * d/dx smooth_l1(x)
  void (*smooth_l1_grad)(const double* x, const double* g, double* acc, std::size_t n);

  // c(m x n) = a(m x k) * b(k x n); c is overwritten
  void (*matmul)(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n);
  // c(m x k) = a(m x n) * b(k x n)^T
  void (*matmul_nt)(const double* a, const double* b, double* c, std::size_t m, std::size_t n, std::size_t k);
  // c(k x n) = a(m x k)^T * b(m x n)
  void (*matmul_tn)(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n);
};

enum class Backend { Auto, Scalar, Avx2 };

const Ops& active();
void set_backend(Backend b);  // throws std::runtime_error if unsupported
Backend active_backend();
bool avx2_supported();

extern const Ops scalar_ops;
const Ops* avx2_ops();  // nullptr when not compiled in or unsupported

// Order-sensitive reduction; one canonical implementation regardless of
// backend so accumulation order never varies.
double reduce_sum(const double* a, std::size_t n);

}  // namespace meshpose::kernels
