#pragma once

// Dense vector primitives and long-array reductions used by the solvers and
// the certification sweeps. Every routine has a scalar reference
// implementation and, on x86-64, an AVX2/FMA variant. The active variant is
// picked once at startup from cpuid and can be forced with the environment
// variable QB_SIMD=scalar|avx2 or with set_isa().

#include <cstddef>
#include <span>
#include <string_view>

namespace qb::kernels {

enum class Isa { scalar, avx2 };

std::string_view isa_name(Isa isa);

// Result of a masked extremum search. index is the position in the input
// array (lowest index wins ties) or npos when no element passed the mask.
struct Extremum {
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);
  double value;
  std::size_t index = npos;
  bool found() const { return index != npos; }
};

struct KernelTable {
  double (*dot)(std::span<const double>, std::span<const double>);
  double (*sum_sq)(std::span<const double>);
  double (*sq_dist)(std::span<const double>, std::span<const double>);
  // y <- y + a * x
  void (*axpy)(double, std::span<const double>, std::span<double>);
  // min over i with den[i] > floor of num[i] / den[i]
  Extremum (*min_ratio)(std::span<const double> num,
                        std::span<const double> den, double floor);
  // max over i with den[i] > floor of num[i] / den[i]
  Extremum (*max_ratio)(std::span<const double> num,
                        std::span<const double> den, double floor);
  // max over i of v[i]
  Extremum (*max_value)(std::span<const double> v);
};

const KernelTable &scalar_table();
// Returns nullptr when the variant was not compiled in.
const KernelTable *avx2_table();

bool cpu_supports(Isa isa);

// Currently selected variant.
Isa active_isa();
// Forces a variant; throws std::runtime_error if the CPU lacks it.
void set_isa(Isa isa);

const KernelTable &active();

inline double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot(a, b);
}
inline double sum_sq(std::span<const double> a) { return active().sum_sq(a); }
inline double sq_dist(std::span<const double> a, std::span<const double> b) {
  return active().sq_dist(a, b);
}
inline void axpy(double a, std::span<const double> x, std::span<double> y) {
  active().axpy(a, x, y);
}
inline Extremum min_ratio(std::span<const double> num,
                          std::span<const double> den, double floor) {
  return active().min_ratio(num, den, floor);
}
inline Extremum max_ratio(std::span<const double> num,
                          std::span<const double> den, double floor) {
  return active().max_ratio(num, den, floor);
}
inline Extremum max_value(std::span<const double> v) {
  return active().max_value(v);
}

} // namespace qb::kernels
