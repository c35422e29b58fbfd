#if defined(BOLTZLAB_HAVE_AVX2)

#include <immintrin.h>

#include <cmath>

#include "kernels_internal.hpp"

// AVX2 variants. Elementwise kernels use separate mul/add (no FMA) so each
// lane performs exactly the scalar operation sequence and results are
// bit-identical to the scalar backend. Reductions keep four lane accumulators
// and differ from the scalar sum only by rounding.

namespace boltzlab::kernels::avx2_impl {

void axpy(double a, const double* x, double* y, std::size_t n) {
  const __m256d av = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d xv = _mm256_loadu_pd(x + i);
    const __m256d yv = _mm256_loadu_pd(y + i);
    _mm256_storeu_pd(y + i, _mm256_add_pd(yv, _mm256_mul_pd(av, xv)));
  }
  for (; i < n; ++i) y[i] = y[i] + a * x[i];
}

void scale(double a, double* x, std::size_t n) {
  const __m256d av = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(x + i, _mm256_mul_pd(av, _mm256_loadu_pd(x + i)));
  }
  for (; i < n; ++i) x[i] *= a;
}

namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

inline __m256d abs_pd(__m256d v) {
  const __m256d mask = _mm256_castsi256_pd(_mm256_set1_epi64x(0x7fffffffffffffffLL));
  return _mm256_and_pd(v, mask);
}

}  // namespace

double reduce_sum(const double* x, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
  double s = hsum(acc);
  for (; i < n; ++i) s += x[i];
  return s;
}

double reduce_sum_sq(const double* x, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d v = _mm256_loadu_pd(x + i);
    acc = _mm256_add_pd(acc, _mm256_mul_pd(v, v));
  }
  double s = hsum(acc);
  for (; i < n; ++i) s += x[i] * x[i];
  return s;
}

double reduce_max_abs(const double* x, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_max_pd(acc, abs_pd(_mm256_loadu_pd(x + i)));
  const __m128d lo = _mm256_castpd256_pd128(acc);
  const __m128d hi = _mm256_extractf128_pd(acc, 1);
  const __m128d m2 = _mm_max_pd(lo, hi);
  double m = _mm_cvtsd_f64(_mm_max_sd(m2, _mm_unpackhi_pd(m2, m2)));
  for (; i < n; ++i) {
    const double a = std::fabs(x[i]);
    if (a > m) m = a;
  }
  return m;
}

void central_moments(const double* x, std::size_t n, double mu, double& m2, double& m4) {
  const __m256d muv = _mm256_set1_pd(mu);
  __m256d a2 = _mm256_setzero_pd();
  __m256d a4 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(x + i), muv);
    const __m256d d2 = _mm256_mul_pd(d, d);
    a2 = _mm256_add_pd(a2, d2);
    a4 = _mm256_add_pd(a4, _mm256_mul_pd(d2, d2));
  }
  double s2 = hsum(a2);
  double s4 = hsum(a4);
  for (; i < n; ++i) {
    const double d = x[i] - mu;
    const double d2 = d * d;
    s2 += d2;
    s4 += d2 * d2;
  }
  m2 = s2;
  m4 = s4;
}

void wall_accel(const double* q, double* out, std::size_t n, double inv_halfwidth,
                double coeff, int exponent) {
  const __m256d invL = _mm256_set1_pd(inv_halfwidth);
  const __m256d cpos = _mm256_set1_pd(coeff);
  const __m256d cneg = _mm256_set1_pd(-coeff);
  const __m256d zero = _mm256_setzero_pd();
  const __m256d one = _mm256_set1_pd(1.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d u = _mm256_mul_pd(_mm256_loadu_pd(q + i), invL);
    // square-and-multiply, same operation order as the scalar backend
    __m256d result = one;
    __m256d b = abs_pd(u);
    int e = exponent;
    while (e > 0) {
      if (e & 1) result = _mm256_mul_pd(result, b);
      b = _mm256_mul_pd(b, b);
      e >>= 1;
    }
    const __m256d negmask = _mm256_cmp_pd(u, zero, _CMP_LT_OQ);
    const __m256d sign = _mm256_blendv_pd(cneg, cpos, negmask);
    _mm256_storeu_pd(out + i, _mm256_mul_pd(sign, result));
  }
  for (; i < n; ++i) {
    const double u = q[i] * inv_halfwidth;
    double result = 1.0;
    double b = std::fabs(u);
    int e = exponent;
    while (e > 0) {
      if (e & 1) result *= b;
      b *= b;
      e >>= 1;
    }
    out[i] = (u < 0.0 ? coeff : -coeff) * result;
  }
}

}  // namespace boltzlab::kernels::avx2_impl

#endif  // BOLTZLAB_HAVE_AVX2
