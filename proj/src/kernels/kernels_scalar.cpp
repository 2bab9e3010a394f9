#include "qb/kernels.hpp"

#include <limits>

namespace qb::kernels {
namespace {

double dot_scalar(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    s += a[i] * b[i];
  return s;
}

double sum_sq_scalar(std::span<const double> a) {
  double s = 0.0;
  for (double v : a)
    s += v * v;
  return s;
}

double sq_dist_scalar(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

void axpy_scalar(double alpha, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i)
    y[i] += alpha * x[i];
}

Extremum min_ratio_scalar(std::span<const double> num,
                          std::span<const double> den, double floor) {
  Extremum best{std::numeric_limits<double>::infinity()};
  for (std::size_t i = 0; i < num.size(); ++i) {
    if (!(den[i] > floor))
      continue;
    const double r = num[i] / den[i];
    if (r < best.value) {
      best.value = r;
      best.index = i;
    }
  }
  return best;
}

Extremum max_ratio_scalar(std::span<const double> num,
                          std::span<const double> den, double floor) {
  Extremum best{-std::numeric_limits<double>::infinity()};
  for (std::size_t i = 0; i < num.size(); ++i) {
    if (!(den[i] > floor))
      continue;
    const double r = num[i] / den[i];
    if (r > best.value) {
      best.value = r;
      best.index = i;
    }
  }
  return best;
}

Extremum max_value_scalar(std::span<const double> v) {
  Extremum best{-std::numeric_limits<double>::infinity()};
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] > best.value) {
      best.value = v[i];
      best.index = i;
    }
  }
  return best;
}

constexpr KernelTable kScalar{dot_scalar,       sum_sq_scalar,
                              sq_dist_scalar,   axpy_scalar,
                              min_ratio_scalar, max_ratio_scalar,
                              max_value_scalar};

} // namespace

const KernelTable &scalar_table() { return kScalar; }

} // namespace qb::kernels
