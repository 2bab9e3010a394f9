#include "qb/oracles.hpp"

#include <cmath>
#include <random>

namespace qb {

void OracleConfig::validate() const {
  if (!(sigma >= 0.0) || !std::isfinite(sigma))
    throw ConfigError("oracle: sigma must be finite and >= 0");
}

NoiseModel noise_model_from_string(const std::string &name) {
  if (name == "gaussian")
    return NoiseModel::gaussian;
  if (name == "sphere")
    return NoiseModel::sphere;
  throw ConfigError("oracle: unknown noise model '" + name + "'");
}

std::string to_string(NoiseModel m) {
  return m == NoiseModel::gaussian ? "gaussian" : "sphere";
}

nlohmann::json to_json(const OracleConfig &c) {
  return {{"sigma", c.sigma},
          {"noise", to_string(c.noise)},
          {"master_seed", c.master_seed}};
}

OracleConfig oracle_config_from_json(const nlohmann::json &j) {
  OracleConfig c;
  c.sigma = j.value("sigma", 0.0);
  c.noise = noise_model_from_string(j.value("noise", std::string("gaussian")));
  c.master_seed = j.value("master_seed", std::uint64_t{0});
  c.validate();
  return c;
}

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t derive_run_seed(std::uint64_t master_seed,
                              std::uint64_t run_index) {
  return mix64(master_seed + 0x9e3779b97f4a7c15ULL * (run_index + 1));
}

Oracle::Oracle(ObjectivePtr f, OracleConfig config)
    : f_(std::move(f)), config_(config) {
  if (!f_)
    throw ConfigError("oracle: missing objective");
  config_.validate();
}

void Oracle::noise(std::uint64_t run_seed, std::int64_t position,
                   std::span<double> xi) const {
  if (config_.deterministic()) {
    std::fill(xi.begin(), xi.end(), 0.0);
    return;
  }
  CounterEngine engine(
      mix64(run_seed ^ mix64(static_cast<std::uint64_t>(position))));
  std::normal_distribution<double> normal(0.0, 1.0);
  double sq = 0.0;
  for (double &v : xi) {
    v = normal(engine);
    sq += v * v;
  }
  double scale = 0.0;
  if (config_.noise == NoiseModel::gaussian) {
    // Per-coordinate variance sigma^2 / n, so E||xi||^2 = sigma^2.
    scale = config_.sigma / std::sqrt(static_cast<double>(xi.size()));
  } else {
    // Uniform direction, radius exactly sigma. A zero vector has probability
    // zero; redraw deterministically if it ever happens.
    while (sq == 0.0) {
      for (double &v : xi) {
        v = normal(engine);
        sq += v * v;
      }
    }
    scale = config_.sigma / std::sqrt(sq);
  }
  for (double &v : xi)
    v *= scale;
}

Oracle::Stream::Stream(const Oracle &oracle, std::uint64_t run_seed)
    : oracle_(&oracle), run_seed_(run_seed) {}

double Oracle::Stream::query_into(std::span<const double> x,
                                  std::int64_t position, std::span<double> g,
                                  std::span<double> grad_exact) {
  if (position <= last_position_)
    throw DeterminismError("oracle stream position " + std::to_string(position) +
                           " reused (last was " +
                           std::to_string(last_position_) + ")");
  last_position_ = position;
  ++queries_;
  const Objective &f = *oracle_->f_;
  const double fx = f.value(x);
  f.gradient(x, grad_exact);
  oracle_->noise(run_seed_, position, g);
  for (std::size_t i = 0; i < g.size(); ++i)
    g[i] += grad_exact[i];
  return fx;
}

GradientSample Oracle::Stream::query(std::span<const double> x,
                                     std::int64_t position) {
  GradientSample s{Point(x.size()), 0.0, Point(x.size())};
  s.f_exact = query_into(x, position, s.g, s.grad_exact);
  return s;
}

} // namespace qb
