#pragma once

// Test objectives with declared minimizers, and the grid/sampling code that
// certifies their structural constants on a compact box.

#include "qb/errors.hpp"

#include "json.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace qb {

using Point = std::vector<double>;

// Throws ConfigError for an empty point or non-finite entries.
void validate_point(std::span<const double> x, const char *what = "point");

// Axis-aligned region of certification.
struct Box {
  Point lower;
  Point upper;

  std::size_t dimension() const { return lower.size(); }
  bool contains(std::span<const double> x) const;
  static Box cube(std::size_t n, double half_width);
};

enum class Provenance { analytic, grid_certified };

struct ConstantsCertificate {
  double gamma = 1.0;
  double mu = 0.0;
  double L = 0.0; // 0 for non-smooth members
  double G = 0.0; // 0 when not certified
  double R = 0.0;
  Box box;
  std::int64_t grid_points = 0;
  Provenance provenance = Provenance::analytic;

  // Throws ConfigError when gamma is outside (0,1] or the box is malformed.
  void validate() const;
};

// Constants a family knows in closed form. Missing entries are certified.
struct DeclaredConstants {
  std::optional<double> gamma;
  std::optional<double> mu;
  std::optional<double> L;
  std::optional<double> G;
};

// Immutable after construction; safe to evaluate concurrently.
class Objective {
public:
  Objective(Point minimizer, double min_value = 0.0);
  virtual ~Objective() = default;

  std::size_t dimension() const { return minimizer_.size(); }
  const Point &minimizer() const { return minimizer_; }
  double min_value() const { return min_value_; }

  virtual std::string family() const = 0;
  virtual nlohmann::json params() const = 0;
  virtual bool smooth() const = 0;
  virtual DeclaredConstants declared() const { return {}; }

  virtual double value(std::span<const double> x) const = 0;
  // Gradient, or the deterministic subgradient selection at kinks.
  virtual void gradient(std::span<const double> x,
                        std::span<double> out) const = 0;

  Point gradient(std::span<const double> x) const;

private:
  Point minimizer_;
  double min_value_;
};

using ObjectivePtr = std::shared_ptr<const Objective>;

// f(x) = 1/2 (x - x*)^T A (x - x*); A symmetric positive semidefinite,
// stored row-major.
ObjectivePtr make_quadratic(std::vector<double> A, Point minimizer);
ObjectivePtr make_quadratic_diag(std::vector<double> diag, Point minimizer);

// Separable sum of d_i^2 + a sin^2(b d_i), d = x - x*.
ObjectivePtr make_sine_bump(double a, double b, Point minimizer);

// Separable sum of p(d_i) with p(s) = |s| for |s| <= 1 and
// 1 + 0.5 (|s| - 1) beyond. Non-smooth, nonconvex, gamma = 1/2.
ObjectivePtr make_plateau(Point minimizer);

// Separable sum of |d_i| + c d_i^2. Non-smooth and convex.
ObjectivePtr make_abs_ridge(double c, Point minimizer);

// f(x) + (mu_add / 2) ||x - x*||^2 with the same minimizer.
ObjectivePtr make_strong_variant(ObjectivePtr base, double mu_add);

// Problem specification document: {family, params, dimension, minimizer,
// certificate}. The certificate is optional.
struct ProblemSpec {
  ObjectivePtr objective;
  std::optional<ConstantsCertificate> certificate;
};

nlohmann::json to_json(const Box &box);
Box box_from_json(const nlohmann::json &j);
nlohmann::json to_json(const ConstantsCertificate &c);
ConstantsCertificate certificate_from_json(const nlohmann::json &j);
nlohmann::json to_json(const Objective &f);
nlohmann::json to_json(const ProblemSpec &spec);
ObjectivePtr objective_from_json(const nlohmann::json &j);
ProblemSpec problem_from_json(const nlohmann::json &j);

// f(x*) - f(x) - (1/gamma) <grad f(x), x* - x>; nonnegative iff the
// quasar-convexity inequality holds at x.
double quasar_gap(const Objective &f, std::span<const double> x, double gamma);

// quasar_gap - (mu/2) ||x - x*||^2.
double strong_quasar_gap(const Objective &f, std::span<const double> x,
                         double gamma, double mu);

struct GridResult {
  double value;
  Point worst; // point attaining the extremum; empty if none
};

// Smallest ratio <grad f(x), x - x*> / (f(x) - f(x*)) over a tensor grid,
// capped at 1. Throws CertificationError with a witness when some grid point
// has f(x) > f(x*) but <grad f(x), x - x*> <= 0.
GridResult certify_gamma(const Objective &f, const Box &box,
                         std::int64_t grid_points);

// Largest mu with strong_quasar_gap(f, x, gamma, mu) >= 0 on the grid,
// excluding a 1e-6 ball around x*. Clamped below at 0.
GridResult certify_mu(const Objective &f, double gamma, const Box &box,
                      std::int64_t grid_points);

inline constexpr double kSafetyMargin = 1.05;

// Sampled gradient Lipschitz constant times kSafetyMargin. Mixes uniform
// pairs with near-coincident and coordinate-direction probes. Throws
// ConfigError for non-smooth members.
GridResult certify_L(const Objective &f, const Box &box, std::int64_t samples,
                     std::uint64_t seed = 0x51ab1e5eedULL);

// Sampled max gradient norm (box vertices included) times kSafetyMargin.
GridResult certify_G(const Objective &f, const Box &box, std::int64_t samples,
                     std::uint64_t seed = 0x9e3779b9ULL);

struct CertificationReport {
  ConstantsCertificate certificate;
  Point worst_point_gamma;
  Point worst_point_mu;
  double min_gap = 0.0; // min strong_quasar_gap over the grid
  double gamma_grid = 0.0;
  double mu_grid = 0.0;
  double L_sampled = 0.0; // 0 for non-smooth members
  double G_sampled = 0.0;
};

struct CertifyOptions {
  std::int64_t grid_points = 1'000'000;
  std::int64_t samples = 20'000;
  // Use this gamma (must not exceed the grid value) when certifying mu.
  std::optional<double> gamma;
  // Prefer the family's closed-form constants where it declares them.
  bool use_declared = true;
};

// Full certification. R in the returned certificate is left at 0; callers
// fill it from their starting point.
CertificationReport certify(const Objective &f, const Box &box,
                            const CertifyOptions &options = {});

} // namespace qb
