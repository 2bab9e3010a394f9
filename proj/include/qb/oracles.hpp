#pragma once

// Deterministic and stochastic first-order oracles. Noise is counter-based:
// the perturbation returned at (run seed, stream position) is a pure
// function of those two numbers, so runs are reproducible regardless of
// scheduling.

#include "qb/problems.hpp"

#include <cstdint>
#include <limits>
#include <span>

namespace qb {

enum class NoiseModel { gaussian, sphere };

struct OracleConfig {
  double sigma = 0.0;
  NoiseModel noise = NoiseModel::gaussian;
  std::uint64_t master_seed = 0;

  bool deterministic() const { return sigma == 0.0; }
  void validate() const;
};

nlohmann::json to_json(const OracleConfig &c);
OracleConfig oracle_config_from_json(const nlohmann::json &j);
NoiseModel noise_model_from_string(const std::string &name);
std::string to_string(NoiseModel m);

// splitmix64 finalizer; a bijection on 64-bit words.
std::uint64_t mix64(std::uint64_t z);

// Stable across versions: mix64(master + 0x9e3779b97f4a7c15 * (run + 1)).
// Injective in run_index for a fixed master seed.
std::uint64_t derive_run_seed(std::uint64_t master_seed,
                              std::uint64_t run_index);

// Uniform random bit generator over a keyed counter. Fresh instances with the
// same key produce the same stream.
class CounterEngine {
public:
  using result_type = std::uint64_t;
  explicit CounterEngine(std::uint64_t key) : key_(key) {}
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }
  result_type operator()() {
    return mix64(key_ + 0x9e3779b97f4a7c15ULL * ++counter_);
  }

private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

struct GradientSample {
  Point g;          // stochastic gradient handed to the algorithm
  double f_exact;   // logging only
  Point grad_exact; // logging only
};

class Oracle {
public:
  Oracle(ObjectivePtr f, OracleConfig config);

  const Objective &objective() const { return *f_; }
  const ObjectivePtr &objective_ptr() const { return f_; }
  const OracleConfig &config() const { return config_; }

  // One run's view of the oracle. Positions must strictly increase.
  class Stream {
  public:
    Stream(const Oracle &oracle, std::uint64_t run_seed);

    GradientSample query(std::span<const double> x, std::int64_t position);

    // Allocation-free variant used by the solvers. Writes the noisy gradient
    // into g and the exact gradient into grad_exact; returns f(x).
    double query_into(std::span<const double> x, std::int64_t position,
                      std::span<double> g, std::span<double> grad_exact);

    std::int64_t queries() const { return queries_; }
    std::uint64_t run_seed() const { return run_seed_; }

  private:
    const Oracle *oracle_;
    std::uint64_t run_seed_;
    std::int64_t last_position_ = -1;
    std::int64_t queries_ = 0;
  };

  Stream stream(std::uint64_t run_seed) const { return Stream(*this, run_seed); }

  // Noise vector at (run_seed, position), written into xi.
  void noise(std::uint64_t run_seed, std::int64_t position,
             std::span<double> xi) const;

private:
  ObjectivePtr f_;
  OracleConfig config_;
};

} // namespace qb
