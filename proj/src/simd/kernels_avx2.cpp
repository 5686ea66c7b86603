#include "sgls/simd/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#define SGLS_TARGET_AVX2 __attribute__((target("avx2,fma")))

namespace sgls::simd {
namespace {

// Elementwise kernels use separate mul/add so the lanes round exactly like
// the scalar reference. Only the reduction uses fused multiply-add.

SGLS_TARGET_AVX2 void axpy_avx2(double a, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d vy = _mm256_loadu_pd(y + i);
    __m256d prod = _mm256_mul_pd(va, _mm256_loadu_pd(x + i));
    _mm256_storeu_pd(y + i, _mm256_add_pd(vy, prod));
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

SGLS_TARGET_AVX2 double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4)
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  acc0 = _mm256_add_pd(acc0, acc1);
  __m128d lo = _mm256_castpd256_pd128(acc0);
  __m128d hi = _mm256_extractf128_pd(acc0, 1);
  __m128d pair = _mm_add_pd(lo, hi);
  double s = _mm_cvtsd_f64(_mm_add_sd(pair, _mm_unpackhi_pd(pair, pair)));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

SGLS_TARGET_AVX2 void flux_update_avx2(double* u, const double* right, const double* left,
                                       double scale, std::size_t n) {
  const __m256d vs = _mm256_set1_pd(scale);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d diff = _mm256_sub_pd(_mm256_loadu_pd(right + i), _mm256_loadu_pd(left + i));
    __m256d vu = _mm256_loadu_pd(u + i);
    _mm256_storeu_pd(u + i, _mm256_sub_pd(vu, _mm256_mul_pd(vs, diff)));
  }
  for (; i < n; ++i) u[i] -= scale * (right[i] - left[i]);
}

SGLS_TARGET_AVX2 void llf_combine_avx2(double* out, const double* fl, const double* fr,
                                       const double* ul, const double* ur, double sigma,
                                       std::size_t n) {
  const __m256d half = _mm256_set1_pd(0.5);
  const double half_sigma = 0.5 * sigma;
  const __m256d vhs = _mm256_set1_pd(half_sigma);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d avg = _mm256_mul_pd(half, _mm256_add_pd(_mm256_loadu_pd(fl + i), _mm256_loadu_pd(fr + i)));
    __m256d jump = _mm256_sub_pd(_mm256_loadu_pd(ur + i), _mm256_loadu_pd(ul + i));
    _mm256_storeu_pd(out + i, _mm256_sub_pd(avg, _mm256_mul_pd(vhs, jump)));
  }
  for (; i < n; ++i) out[i] = 0.5 * (fl[i] + fr[i]) - half_sigma * (ur[i] - ul[i]);
}

}  // namespace

namespace detail {
const KernelTable avx2_table{Isa::avx2, axpy_avx2, dot_avx2, flux_update_avx2,
                             llf_combine_avx2};
}

}  // namespace sgls::simd

#endif
