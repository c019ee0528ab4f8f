#include "meshpose/kernels.hpp"

// AVX2 variants of the reference kernels. Vectorization is only across
// independent output elements; per-element operation order is identical to
// kernels_scalar.cpp, so results are bit-identical to the scalar backend.
// Built with -mavx2 but without FMA: mul and add stay separate roundings.

#if defined(__AVX2__) && defined(__x86_64__)

#include <immintrin.h>

#include <cmath>
#include <cstring>

namespace meshpose::kernels {
namespace {

void v_add(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) out[i] = a[i] + b[i];
}

void v_sub(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) out[i] = a[i] - b[i];
}

void v_mul(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  for (; i < n; ++i) out[i] = a[i] * b[i];
}

void v_scale(const double* a, double alpha, double* out, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), va));
  for (; i < n; ++i) out[i] = a[i] * alpha;
}

void v_axpy(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d t = _mm256_mul_pd(va, _mm256_loadu_pd(x + i));
    _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), t));
  }
  for (; i < n; ++i) y[i] = y[i] + alpha * x[i];
}

void v_square(const double* a, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d v = _mm256_loadu_pd(a + i);
    _mm256_storeu_pd(out + i, _mm256_mul_pd(v, v));
  }
  for (; i < n; ++i) out[i] = a[i] * a[i];
}

void v_vsqrt(const double* a, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(out + i, _mm256_sqrt_pd(_mm256_loadu_pd(a + i)));
  for (; i < n; ++i) out[i] = std::sqrt(a[i]);
}

void v_relu(const double* a, double* out, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d v = _mm256_loadu_pd(a + i);
    __m256d mask = _mm256_cmp_pd(v, zero, _CMP_GT_OQ);
    _mm256_storeu_pd(out + i, _mm256_and_pd(v, mask));
  }
  for (; i < n; ++i) out[i] = a[i] > 0.0 ? a[i] : 0.0;
}

// blend instead of adding a masked zero so untouched lanes keep their exact bits
void v_relu_grad(const double* x, const double* g, double* acc, std::size_t n) {
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d xv = _mm256_loadu_pd(x + i);
    __m256d av = _mm256_loadu_pd(acc + i);
    __m256d mask = _mm256_cmp_pd(xv, zero, _CMP_GT_OQ);
    __m256d sum = _mm256_add_pd(av, _mm256_loadu_pd(g + i));
    _mm256_storeu_pd(acc + i, _mm256_blendv_pd(av, sum, mask));
  }
  for (; i < n; ++i) {
    if (x[i] > 0.0) acc[i] = acc[i] + g[i];
  }
}

void v_square_grad(const double* x, const double* g, double* acc, std::size_t n) {
  const __m256d two = _mm256_set1_pd(2.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d t = _mm256_mul_pd(_mm256_mul_pd(two, _mm256_loadu_pd(x + i)), _mm256_loadu_pd(g + i));
    _mm256_storeu_pd(acc + i, _mm256_add_pd(_mm256_loadu_pd(acc + i), t));
  }
  for (; i < n; ++i) acc[i] = acc[i] + 2.0 * x[i] * g[i];
}

void v_mul_acc(const double* a, const double* b, double* acc, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d t = _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    _mm256_storeu_pd(acc + i, _mm256_add_pd(_mm256_loadu_pd(acc + i), t));
  }
  for (; i < n; ++i) acc[i] = acc[i] + a[i] * b[i];
}

void v_smooth_l1(const double* a, double* out, std::size_t n) {
  const __m256d signmask = _mm256_set1_pd(-0.0);
  const __m256d half = _mm256_set1_pd(0.5);
  const __m256d one = _mm256_set1_pd(1.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d x = _mm256_loadu_pd(a + i);
    __m256d ax = _mm256_andnot_pd(signmask, x);
    __m256d quad = _mm256_mul_pd(half, _mm256_mul_pd(x, x));
    __m256d lin = _mm256_sub_pd(ax, half);
    __m256d mask = _mm256_cmp_pd(ax, one, _CMP_LT_OQ);
    _mm256_storeu_pd(out + i, _mm256_blendv_pd(lin, quad, mask));
  }
  for (; i < n; ++i) {
    double x = a[i];
    double ax = std::fabs(x);
    out[i] = ax < 1.0 ? 0.5 * (x * x) : ax - 0.5;
  }
}

void v_smooth_l1_grad(const double* x, const double* g, double* acc, std::size_t n) {
  const __m256d signmask = _mm256_set1_pd(-0.0);
  const __m256d one = _mm256_set1_pd(1.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d v = _mm256_loadu_pd(x + i);
    __m256d av = _mm256_andnot_pd(signmask, v);
    __m256d sgn = _mm256_or_pd(_mm256_and_pd(v, signmask), one);  // +/-1 by sign bit
    __m256d mask = _mm256_cmp_pd(av, one, _CMP_LT_OQ);
    __m256d d = _mm256_blendv_pd(sgn, v, mask);
    __m256d t = _mm256_mul_pd(_mm256_loadu_pd(g + i), d);
    _mm256_storeu_pd(acc + i, _mm256_add_pd(_mm256_loadu_pd(acc + i), t));
  }
  for (; i < n; ++i) {
    double v = x[i];
    double d = std::fabs(v) < 1.0 ? v : (v > 0.0 ? 1.0 : -1.0);
    acc[i] = acc[i] + g[i] * d;
  }
}

void v_matmul(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  std::memset(c, 0, m * n * sizeof(double));
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    const double* arow = a + i * k;
    for (std::size_t kk = 0; kk < k; ++kk) {
      const double av = arow[kk];
      const __m256d avv = _mm256_set1_pd(av);
      const double* brow = b + kk * n;
      std::size_t j = 0;
      for (; j + 4 <= n; j += 4) {
        __m256d t = _mm256_mul_pd(avv, _mm256_loadu_pd(brow + j));
        _mm256_storeu_pd(crow + j, _mm256_add_pd(_mm256_loadu_pd(crow + j), t));
      }
      for (; j < n; ++j) crow[j] = crow[j] + av * brow[j];
    }
  }
}

// 4 dot products at once via in-register 4x4 transposes of b; the four
// partial adds per block run in ascending j order, matching the scalar loop.
void v_matmul_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t n, std::size_t k) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * n;
    std::size_t kk = 0;
    for (; kk + 4 <= k; kk += 4) {
      const double* b0 = b + (kk + 0) * n;
      const double* b1 = b + (kk + 1) * n;
      const double* b2 = b + (kk + 2) * n;
      const double* b3 = b + (kk + 3) * n;
      __m256d acc = _mm256_setzero_pd();
      std::size_t j = 0;
      for (; j + 4 <= n; j += 4) {
        __m256d r0 = _mm256_loadu_pd(b0 + j);
        __m256d r1 = _mm256_loadu_pd(b1 + j);
        __m256d r2 = _mm256_loadu_pd(b2 + j);
        __m256d r3 = _mm256_loadu_pd(b3 + j);
        __m256d t0 = _mm256_unpacklo_pd(r0, r1);
        __m256d t1 = _mm256_unpackhi_pd(r0, r1);
        __m256d t2 = _mm256_unpacklo_pd(r2, r3);
        __m256d t3 = _mm256_unpackhi_pd(r2, r3);
        __m256d col0 = _mm256_permute2f128_pd(t0, t2, 0x20);
        __m256d col1 = _mm256_permute2f128_pd(t1, t3, 0x20);
        __m256d col2 = _mm256_permute2f128_pd(t0, t2, 0x31);
        __m256d col3 = _mm256_permute2f128_pd(t1, t3, 0x31);
        acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_set1_pd(arow[j + 0]), col0));
        acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_set1_pd(arow[j + 1]), col1));
        acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_set1_pd(arow[j + 2]), col2));
        acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_set1_pd(arow[j + 3]), col3));
      }
      alignas(32) double lane[4];
      _mm256_store_pd(lane, acc);
      for (; j < n; ++j) {
        lane[0] = lane[0] + arow[j] * b0[j];
        lane[1] = lane[1] + arow[j] * b1[j];
        lane[2] = lane[2] + arow[j] * b2[j];
        lane[3] = lane[3] + arow[j] * b3[j];
      }
      c[i * k + kk + 0] = lane[0];
      c[i * k + kk + 1] = lane[1];
      c[i * k + kk + 2] = lane[2];
      c[i * k + kk + 3] = lane[3];
    }
    for (; kk < k; ++kk) {
      const double* brow = b + kk * n;
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc = acc + arow[j] * brow[j];
      c[i * k + kk] = acc;
    }
  }
}

void v_matmul_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n) {
  std::memset(c, 0, k * n * sizeof(double));
  for (std::size_t i = 0; i < m; ++i) {
    const double* brow = b + i * n;
    const double* arow = a + i * k;
    for (std::size_t kk = 0; kk < k; ++kk) {
      const double av = arow[kk];
      const __m256d avv = _mm256_set1_pd(av);
      double* crow = c + kk * n;
      std::size_t j = 0;
      for (; j + 4 <= n; j += 4) {
        __m256d t = _mm256_mul_pd(avv, _mm256_loadu_pd(brow + j));
        _mm256_storeu_pd(crow + j, _mm256_add_pd(_mm256_loadu_pd(crow + j), t));
      }
      for (; j < n; ++j) crow[j] = crow[j] + av * brow[j];
    }
  }
}

const Ops avx2_table = {
    "avx2", v_add,       v_sub,           v_mul,    v_scale,     v_axpy,
    v_square, v_vsqrt,   v_relu,          v_relu_grad, v_square_grad, v_mul_acc,
    v_smooth_l1, v_smooth_l1_grad, v_matmul, v_matmul_nt, v_matmul_tn,
};

}  // namespace

const Ops* avx2_ops() { return &avx2_table; }

}  // namespace meshpose::kernels

#else

namespace meshpose::kernels {
const Ops* avx2_ops() { return nullptr; }
}  // namespace meshpose::kernels

#endif
