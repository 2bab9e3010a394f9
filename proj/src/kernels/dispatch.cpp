#include "qb/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace qb::kernels {

#if !defined(QB_HAVE_AVX2)
const KernelTable *avx2_table() { return nullptr; }
#endif

std::string_view isa_name(Isa isa) {
  switch (isa) {
  case Isa::scalar:
    return "scalar";
  case Isa::avx2:
    return "avx2";
  }
  return "unknown";
}

bool cpu_supports(Isa isa) {
  switch (isa) {
  case Isa::scalar:
    return true;
  case Isa::avx2:
#if defined(QB_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
  }
  return false;
}

namespace {

Isa detect() {
  if (const char *env = std::getenv("QB_SIMD")) {
    const std::string want(env);
    if (want == "scalar")
      return Isa::scalar;
    if (want == "avx2" && cpu_supports(Isa::avx2))
      return Isa::avx2;
  }
  return cpu_supports(Isa::avx2) ? Isa::avx2 : Isa::scalar;
}

std::atomic<Isa> &current() {
  static std::atomic<Isa> isa{detect()};
  return isa;
}

} // namespace

Isa active_isa() { return current().load(std::memory_order_relaxed); }

void set_isa(Isa isa) {
  if (!cpu_supports(isa))
    throw std::runtime_error("kernel variant not supported on this CPU: " +
                             std::string(isa_name(isa)));
  current().store(isa, std::memory_order_relaxed);
}

const KernelTable &active() {
  if (active_isa() == Isa::avx2)
    return *avx2_table();
  return scalar_table();
}

} // namespace qb::kernels
