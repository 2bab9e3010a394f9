// Compiled with -mavx2 -mfma. Nothing in this file may run before
// cpu_supports(Isa::avx2) has been confirmed by the dispatcher.

#include "qb/kernels.hpp"

#include <immintrin.h>

#include <limits>

namespace qb::kernels {
namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

double dot_avx2(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = a.size();
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(&a[i]), _mm256_loadu_pd(&b[i]), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(&a[i + 4]),
                           _mm256_loadu_pd(&b[i + 4]), acc1);
  }
  for (; i + 4 <= n; i += 4)
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(&a[i]), _mm256_loadu_pd(&b[i]), acc0);
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i)
    s += a[i] * b[i];
  return s;
}

double sum_sq_avx2(std::span<const double> a) { return dot_avx2(a, a); }

double sq_dist_avx2(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = a.size();
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d =
        _mm256_sub_pd(_mm256_loadu_pd(&a[i]), _mm256_loadu_pd(&b[i]));
    acc = _mm256_fmadd_pd(d, d, acc);
  }
  double s = hsum(acc);
  for (; i < n; ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

void axpy_avx2(double alpha, std::span<const double> x, std::span<double> y) {
  const std::size_t n = x.size();
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d vy =
        _mm256_fmadd_pd(va, _mm256_loadu_pd(&x[i]), _mm256_loadu_pd(&y[i]));
    _mm256_storeu_pd(&y[i], vy);
  }
  for (; i < n; ++i)
    y[i] += alpha * x[i];
}

// Lane-wise extremum with index tracking. Indices are carried as doubles,
// exact below 2^53. Strict comparisons keep the first index in each lane;
// the cross-lane reduction breaks value ties by the lower index, which
// reproduces the scalar first-occurrence rule exactly.
template <bool IsMin, bool Masked>
Extremum extremum_avx2(std::span<const double> num, std::span<const double> den,
                       double floor) {
  constexpr double sentinel = IsMin ? std::numeric_limits<double>::infinity()
                                    : -std::numeric_limits<double>::infinity();
  const std::size_t n = num.size();
  __m256d best = _mm256_set1_pd(sentinel);
  __m256d best_idx = _mm256_set1_pd(-1.0);
  __m256d idx = _mm256_setr_pd(0.0, 1.0, 2.0, 3.0);
  const __m256d four = _mm256_set1_pd(4.0);
  const __m256d vsent = _mm256_set1_pd(sentinel);
  const __m256d vfloor = _mm256_set1_pd(floor);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d r = _mm256_loadu_pd(&num[i]);
    if constexpr (Masked) {
      const __m256d d = _mm256_loadu_pd(&den[i]);
      const __m256d ok = _mm256_cmp_pd(d, vfloor, _CMP_GT_OQ);
      r = _mm256_blendv_pd(vsent, _mm256_div_pd(r, d), ok);
    }
    const __m256d better = IsMin ? _mm256_cmp_pd(r, best, _CMP_LT_OQ)
                                 : _mm256_cmp_pd(r, best, _CMP_GT_OQ);
    best = _mm256_blendv_pd(best, r, better);
    best_idx = _mm256_blendv_pd(best_idx, idx, better);
    idx = _mm256_add_pd(idx, four);
  }
  alignas(32) double vals[4];
  alignas(32) double inds[4];
  _mm256_store_pd(vals, best);
  _mm256_store_pd(inds, best_idx);
  Extremum out{sentinel};
  for (int lane = 0; lane < 4; ++lane) {
    if (inds[lane] < 0.0)
      continue;
    const auto li = static_cast<std::size_t>(inds[lane]);
    const bool better = IsMin ? vals[lane] < out.value : vals[lane] > out.value;
    if (better || (vals[lane] == out.value && li < out.index)) {
      out.value = vals[lane];
      out.index = li;
    }
  }
  for (; i < n; ++i) {
    double r = num[i];
    if constexpr (Masked) {
      if (!(den[i] > floor))
        continue;
      r = num[i] / den[i];
    }
    if (IsMin ? r < out.value : r > out.value) {
      out.value = r;
      out.index = i;
    }
  }
  return out;
}

Extremum min_ratio_avx2(std::span<const double> num,
                        std::span<const double> den, double floor) {
  return extremum_avx2<true, true>(num, den, floor);
}

Extremum max_ratio_avx2(std::span<const double> num,
                        std::span<const double> den, double floor) {
  return extremum_avx2<false, true>(num, den, floor);
}

Extremum max_value_avx2(std::span<const double> v) {
  return extremum_avx2<false, false>(v, v, 0.0);
}

constexpr KernelTable kAvx2{dot_avx2,       sum_sq_avx2,    sq_dist_avx2,
                            axpy_avx2,      min_ratio_avx2, max_ratio_avx2,
                            max_value_avx2};

} // namespace

const KernelTable *avx2_table() { return &kAvx2; }

} // namespace qb::kernels
