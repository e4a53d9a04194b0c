#ifdef RFR_BUILD_AVX2

#include <immintrin.h>

#include <cmath>

#include "rfr/kernels/kernels.hpp"

namespace rfr::kernels::detail {

namespace {

// 2^k for integral k held in a double lane; k must stay in [-1022, 1023]
inline __m256d pow2_int(__m256d k) {
  __m128i k32 = _mm256_cvtpd_epi32(k);
  __m256i k64 = _mm256_cvtepi32_epi64(k32);
  k64 = _mm256_add_epi64(k64, _mm256_set1_epi64x(1023));
  k64 = _mm256_slli_epi64(k64, 52);
  return _mm256_castsi256_pd(k64);
}

// cephes-style exp on four doubles: round to nearest multiple of ln2, rational
// approximation on the remainder, then scale by 2^n. Scaling happens in two
// halves so deep-underflow arguments still produce correct subnormals.
inline __m256d exp4(__m256d x) {
  const __m256d max_arg = _mm256_set1_pd(709.782712893383996843);
  const __m256d min_arg = _mm256_set1_pd(-745.2);
  const __m256d log2e = _mm256_set1_pd(1.44269504088896340736);
  const __m256d ln2_hi = _mm256_set1_pd(6.93145751953125e-1);
  const __m256d ln2_lo = _mm256_set1_pd(1.42860682030941723212e-6);
  const __m256d half = _mm256_set1_pd(0.5);
  const __m256d one = _mm256_set1_pd(1.0);

  const __m256d too_big = _mm256_cmp_pd(x, max_arg, _CMP_GT_OQ);
  const __m256d too_small = _mm256_cmp_pd(x, min_arg, _CMP_LT_OQ);
  const __m256d xc = _mm256_min_pd(_mm256_max_pd(x, min_arg), max_arg);

  const __m256d n = _mm256_floor_pd(_mm256_fmadd_pd(xc, log2e, half));
  __m256d r = _mm256_fnmadd_pd(n, ln2_hi, xc);
  r = _mm256_fnmadd_pd(n, ln2_lo, r);
  const __m256d rr = _mm256_mul_pd(r, r);

  __m256d px = _mm256_set1_pd(1.26177193074810590878e-4);
  px = _mm256_fmadd_pd(px, rr, _mm256_set1_pd(3.02994407707441961300e-2));
  px = _mm256_fmadd_pd(px, rr, _mm256_set1_pd(9.99999999999999999910e-1));
  px = _mm256_mul_pd(px, r);

  __m256d qx = _mm256_set1_pd(3.00198505138664455042e-6);
  qx = _mm256_fmadd_pd(qx, rr, _mm256_set1_pd(2.52448340349684104192e-3));
  qx = _mm256_fmadd_pd(qx, rr, _mm256_set1_pd(2.27265548208155028766e-1));
  qx = _mm256_fmadd_pd(qx, rr, _mm256_set1_pd(2.00000000000000000005));

  __m256d e = _mm256_div_pd(px, _mm256_sub_pd(qx, px));
  e = _mm256_fmadd_pd(e, _mm256_set1_pd(2.0), one);

  const __m256d n_half = _mm256_round_pd(_mm256_mul_pd(n, half), _MM_FROUND_TO_ZERO | _MM_FROUND_NO_EXC);
  const __m256d n_rest = _mm256_sub_pd(n, n_half);
  e = _mm256_mul_pd(_mm256_mul_pd(e, pow2_int(n_half)), pow2_int(n_rest));

  e = _mm256_blendv_pd(e, _mm256_set1_pd(HUGE_VAL), too_big);
  e = _mm256_blendv_pd(e, _mm256_setzero_pd(), too_small);
  return e;
}

inline double hsum(__m256d v) {
  alignas(32) double tmp[4];
  _mm256_store_pd(tmp, v);
  return (tmp[0] + tmp[1]) + (tmp[2] + tmp[3]);
}

}  // namespace

void vexp_avx2(const double* x, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, exp4(_mm256_loadu_pd(x + i)));
  }
  if (i < n) {
    alignas(32) double in[4] = {0, 0, 0, 0};
    alignas(32) double res[4];
    for (std::size_t j = i; j < n; ++j) in[j - i] = x[j];
    _mm256_store_pd(res, exp4(_mm256_load_pd(in)));
    for (std::size_t j = i; j < n; ++j) out[j] = res[j - i];
  }
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc);
  }
  double s = hsum(acc);
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_avx2(double a, const double* x, double* y, std::size_t n) {
  const __m256d av = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

double sum_sq_diff_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    acc = _mm256_fmadd_pd(d, d, acc);
  }
  double s = hsum(acc);
  for (; i < n; ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

}  // namespace rfr::kernels::detail

#endif  // RFR_BUILD_AVX2
