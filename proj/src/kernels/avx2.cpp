#include <immintrin.h>

#include <cmath>

#include "spdcal/kernels.hpp"

namespace spdcal::kernels::avx2 {
namespace {

double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

double sum(const double* x, std::size_t n) {
  __m256d a0 = _mm256_setzero_pd();
  __m256d a1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    a0 = _mm256_add_pd(a0, _mm256_loadu_pd(x + i));
    a1 = _mm256_add_pd(a1, _mm256_loadu_pd(x + i + 4));
  }
  double s = hsum(_mm256_add_pd(a0, a1));
  for (; i < n; ++i) s += x[i];
  return s;
}

double sum_sq_dev(const double* x, std::size_t n, double mean) {
  const __m256d mu = _mm256_set1_pd(mean);
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(x + i), mu);
    acc = _mm256_fmadd_pd(d, d, acc);
  }
  double s = hsum(acc);
  for (; i < n; ++i) {
    const double d = x[i] - mean;
    s += d * d;
  }
  return s;
}

void axpy(double a, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

double allan_sumsq(const double* p, std::size_t n_terms, std::size_t m) {
  const __m256d two = _mm256_set1_pd(2.0);
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n_terms; i += 4) {
    const __m256d p0 = _mm256_loadu_pd(p + i);
    const __m256d p1 = _mm256_loadu_pd(p + i + m);
    const __m256d p2 = _mm256_loadu_pd(p + i + 2 * m);
    const __m256d d = _mm256_add_pd(_mm256_sub_pd(p2, _mm256_mul_pd(two, p1)), p0);
    acc = _mm256_fmadd_pd(d, d, acc);
  }
  double s = hsum(acc);
  for (; i < n_terms; ++i) {
    const double d = p[i + 2 * m] - 2.0 * p[i + m] + p[i];
    s += d * d;
  }
  return s;
}

// Exact for 0 <= v < 2^52.
inline __m256d small_int64_to_double(__m256i v) {
  const __m256d magic = _mm256_set1_pd(0x1p52);
  return _mm256_sub_pd(_mm256_castsi256_pd(_mm256_or_si256(v, _mm256_castpd_si256(magic))), magic);
}

void delay_histogram(const std::int64_t* t, std::size_t n, std::int64_t window, double bin_ticks,
                     std::uint64_t* counts, std::size_t n_bins) {
  const __m256d width = _mm256_set1_pd(bin_ticks);
  alignas(16) std::int32_t bins[4];
  std::size_t end = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (end < i + 1) end = i + 1;
    while (end < n && t[end] - t[i] <= window) ++end;
    const __m256i base = _mm256_set1_epi64x(t[i]);
    std::size_t j = i + 1;
    for (; j + 4 <= end; j += 4) {
      const __m256i delta =
          _mm256_sub_epi64(_mm256_loadu_si256(reinterpret_cast<const __m256i*>(t + j)), base);
      const __m256d q = _mm256_floor_pd(_mm256_div_pd(small_int64_to_double(delta), width));
      _mm_store_si128(reinterpret_cast<__m128i*>(bins), _mm256_cvttpd_epi32(q));
      for (int k = 0; k < 4; ++k) {
        const auto b = static_cast<std::size_t>(bins[k]);
        if (b < n_bins) ++counts[b];
      }
    }
    for (; j < end; ++j) {
      const auto b = static_cast<std::size_t>(std::floor(static_cast<double>(t[j] - t[i]) / bin_ticks));
      if (b < n_bins) ++counts[b];
    }
  }
}

void radial_row(const double* row, std::size_t nx, double x0, double dx, double dy2, double r2,
                RadialSums& acc) {
  const __m256d vx0 = _mm256_set1_pd(x0);
  const __m256d vdx = _mm256_set1_pd(dx);
  const __m256d vdy2 = _mm256_set1_pd(dy2);
  const __m256d vr2 = _mm256_set1_pd(r2);
  const __m256d step = _mm256_set1_pd(4.0);
  __m256d k = _mm256_setr_pd(0.0, 1.0, 2.0, 3.0);
  __m256d in_sum = _mm256_setzero_pd();
  __m256d in_sq = _mm256_setzero_pd();
  __m256d out_sum = _mm256_setzero_pd();
  std::size_t in_count = 0;
  std::size_t i = 0;
  for (; i + 4 <= nx; i += 4) {
    const __m256d x = _mm256_add_pd(vx0, _mm256_mul_pd(k, vdx));
    const __m256d d2 = _mm256_add_pd(_mm256_mul_pd(x, x), vdy2);
    const __m256d inside = _mm256_cmp_pd(d2, vr2, _CMP_LE_OQ);
    const __m256d v = _mm256_loadu_pd(row + i);
    const __m256d vin = _mm256_and_pd(inside, v);
    in_sum = _mm256_add_pd(in_sum, vin);
    in_sq = _mm256_fmadd_pd(vin, vin, in_sq);
    out_sum = _mm256_add_pd(out_sum, _mm256_andnot_pd(inside, v));
    in_count += static_cast<std::size_t>(__builtin_popcount(_mm256_movemask_pd(inside)));
    k = _mm256_add_pd(k, step);
  }
  acc.inside_sum += hsum(in_sum);
  acc.inside_sumsq += hsum(in_sq);
  acc.outside_sum += hsum(out_sum);
  acc.inside_count += in_count;
  for (; i < nx; ++i) {
    const double x = x0 + static_cast<double>(i) * dx;
    const double v = row[i];
    if (x * x + dy2 <= r2) {
      acc.inside_sum += v;
      acc.inside_sumsq += v * v;
      ++acc.inside_count;
    } else {
      acc.outside_sum += v;
    }
  }
}

constexpr Table kTable{sum, sum_sq_dev, axpy, allan_sumsq, delay_histogram, radial_row};

}  // namespace

const Table& table() { return kTable; }

}  // namespace spdcal::kernels::avx2
