// Compiled with -mavx2 -mfma; only reached through the dispatch table after a
// CPUID check.

#include "hfsel/kernels.hpp"

#include <immintrin.h>

#include <cmath>

namespace hfsel::kernels::avx2 {

namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

inline __m256d abs_pd(__m256d v) {
  return _mm256_andnot_pd(_mm256_set1_pd(-0.0), v);
}

}  // namespace

double dot(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

double gather_dot(const double* w, const std::uint32_t* idx, const double* val, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m128i ix0 = _mm_loadu_si128(reinterpret_cast<const __m128i*>(idx + i));
    const __m128i ix1 = _mm_loadu_si128(reinterpret_cast<const __m128i*>(idx + i + 4));
    const __m256d w0 = _mm256_i32gather_pd(w, ix0, 8);
    const __m256d w1 = _mm256_i32gather_pd(w, ix1, 8);
    acc0 = _mm256_fmadd_pd(w0, _mm256_loadu_pd(val + i), acc0);
    acc1 = _mm256_fmadd_pd(w1, _mm256_loadu_pd(val + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    const __m128i ix = _mm_loadu_si128(reinterpret_cast<const __m128i*>(idx + i));
    acc0 = _mm256_fmadd_pd(_mm256_i32gather_pd(w, ix, 8), _mm256_loadu_pd(val + i), acc0);
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += w[idx[i]] * val[i];
  return s;
}

double gather_dot_f32(const float* w, const std::uint32_t* idx, const double* val,
                      std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m128i ix = _mm_loadu_si128(reinterpret_cast<const __m128i*>(idx + i));
    const __m256d wv = _mm256_cvtps_pd(_mm_i32gather_ps(w, ix, 4));
    acc = _mm256_fmadd_pd(wv, _mm256_loadu_pd(val + i), acc);
  }
  double s = hsum(acc);
  for (; i < n; ++i) s += static_cast<double>(w[idx[i]]) * val[i];
  return s;
}

void prox_l1_step(double* out, const double* w, const double* g, double step, double thresh,
                  std::size_t n) {
  const __m256d vstep = _mm256_set1_pd(step);
  const __m256d vthr = _mm256_set1_pd(thresh);
  const __m256d zero = _mm256_setzero_pd();
  const __m256d sign = _mm256_set1_pd(-0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d v = _mm256_fnmadd_pd(vstep, _mm256_loadu_pd(g + i), _mm256_loadu_pd(w + i));
    const __m256d mag = _mm256_sub_pd(abs_pd(v), vthr);
    const __m256d keep = _mm256_cmp_pd(mag, zero, _CMP_GT_OQ);
    const __m256d signed_mag = _mm256_or_pd(mag, _mm256_and_pd(v, sign));
    _mm256_storeu_pd(out + i, _mm256_and_pd(signed_mag, keep));
  }
  for (; i < n; ++i) {
    const double v = w[i] - step * g[i];
    const double mag = std::fabs(v) - thresh;
    out[i] = mag > 0.0 ? std::copysign(mag, v) : 0.0;
  }
}

void prox_l2_step(double* out, const double* w, const double* g, double step, double shrink,
                  std::size_t n) {
  const __m256d vstep = _mm256_set1_pd(step);
  const __m256d vshr = _mm256_set1_pd(shrink);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d v = _mm256_fnmadd_pd(vstep, _mm256_loadu_pd(g + i), _mm256_loadu_pd(w + i));
    _mm256_storeu_pd(out + i, _mm256_mul_pd(v, vshr));
  }
  for (; i < n; ++i) out[i] = (w[i] - step * g[i]) * shrink;
}

double l1_norm(const double* a, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, abs_pd(_mm256_loadu_pd(a + i)));
  double s = hsum(acc);
  for (; i < n; ++i) s += std::fabs(a[i]);
  return s;
}

double sq_norm(const double* a, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d v = _mm256_loadu_pd(a + i);
    acc = _mm256_fmadd_pd(v, v, acc);
  }
  double s = hsum(acc);
  for (; i < n; ++i) s += a[i] * a[i];
  return s;
}

void diff_stats(const double* a, const double* b, const double* g, std::size_t n,
                double* g_dot_diff, double* sq_dist) {
  __m256d gd = _mm256_setzero_pd();
  __m256d sd = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    gd = _mm256_fmadd_pd(_mm256_loadu_pd(g + i), d, gd);
    sd = _mm256_fmadd_pd(d, d, sd);
  }
  double gsum = hsum(gd);
  double ssum = hsum(sd);
  for (; i < n; ++i) {
    const double d = a[i] - b[i];
    gsum += g[i] * d;
    ssum += d * d;
  }
  *g_dot_diff = gsum;
  *sq_dist = ssum;
}

}  // namespace hfsel::kernels::avx2
