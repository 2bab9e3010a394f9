#include "qb/problems.hpp"

#include "qb/kernels.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace qb {

void validate_point(std::span<const double> x, const char *what) {
  if (x.empty())
    throw ConfigError(std::string(what) + ": dimension must be >= 1");
  for (double v : x)
    if (!std::isfinite(v))
      throw ConfigError(std::string(what) + ": non-finite entry");
}

bool Box::contains(std::span<const double> x) const {
  if (x.size() != lower.size())
    return false;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (x[i] < lower[i] || x[i] > upper[i])
      return false;
  return true;
}

Box Box::cube(std::size_t n, double half_width) {
  return Box{Point(n, -half_width), Point(n, half_width)};
}

void ConstantsCertificate::validate() const {
  if (!(gamma > 0.0 && gamma <= 1.0))
    throw ConfigError("certificate: gamma must lie in (0, 1]");
  if (!(mu >= 0.0) || !(L >= 0.0) || !(G >= 0.0) || !(R >= 0.0))
    throw ConfigError("certificate: constants must be nonnegative");
  if (box.lower.size() != box.upper.size())
    throw ConfigError("certificate: malformed box");
  for (std::size_t i = 0; i < box.lower.size(); ++i)
    if (!(box.lower[i] <= box.upper[i]))
      throw ConfigError("certificate: box lower bound exceeds upper bound");
}

Objective::Objective(Point minimizer, double min_value)
    : minimizer_(std::move(minimizer)), min_value_(min_value) {
  validate_point(minimizer_, "minimizer");
}

Point Objective::gradient(std::span<const double> x) const {
  Point g(x.size());
  gradient(x, g);
  return g;
}

namespace {

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

class Quadratic final : public Objective {
public:
  Quadratic(std::vector<double> A, Point minimizer, bool diagonal)
      : Objective(std::move(minimizer)), A_(std::move(A)), diagonal_(diagonal) {
    const std::size_t n = dimension();
    if (diagonal_ ? A_.size() != n : A_.size() != n * n)
      throw ConfigError("quadratic: A has the wrong size for the dimension");
    Eigen::MatrixXd m(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        m(i, j) = diagonal_ ? (i == j ? A_[i] : 0.0) : A_[i * n + j];
    if (!m.isApprox(m.transpose(), 1e-12))
      throw ConfigError("quadratic: A must be symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m,
                                                       Eigen::EigenvaluesOnly);
    lambda_min_ = eig.eigenvalues().minCoeff();
    lambda_max_ = eig.eigenvalues().maxCoeff();
    if (lambda_min_ < -1e-12)
      throw ConfigError("quadratic: A must be positive semidefinite");
    lambda_min_ = std::max(lambda_min_, 0.0);
  }

  std::string family() const override { return "quadratic"; }
  nlohmann::json params() const override {
    return diagonal_ ? nlohmann::json{{"diag", A_}} : nlohmann::json{{"A", A_}};
  }
  bool smooth() const override { return true; }
  DeclaredConstants declared() const override {
    return {1.0, lambda_min_, lambda_max_, std::nullopt};
  }

  double value(std::span<const double> x) const override {
    const std::size_t n = dimension();
    const Point &xs = minimizer();
    if (diagonal_) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double d = x[i] - xs[i];
        s += A_[i] * d * d;
      }
      return 0.5 * s;
    }
    Point &g = scratch();
    gradient(x, g);
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      s += (x[i] - xs[i]) * g[i];
    return 0.5 * s;
  }

  void gradient(std::span<const double> x,
                std::span<double> out) const override {
    const std::size_t n = dimension();
    const Point &xs = minimizer();
    if (diagonal_) {
      for (std::size_t i = 0; i < n; ++i)
        out[i] = A_[i] * (x[i] - xs[i]);
      return;
    }
    Point d(n);
    for (std::size_t i = 0; i < n; ++i)
      d[i] = x[i] - xs[i];
    for (std::size_t i = 0; i < n; ++i)
      out[i] = kernels::dot(std::span<const double>(A_).subspan(i * n, n), d);
  }

private:
  Point &scratch() const {
    thread_local Point buf;
    buf.resize(dimension());
    return buf;
  }

  std::vector<double> A_;
  bool diagonal_;
  double lambda_min_ = 0.0;
  double lambda_max_ = 0.0;
};

class SineBump final : public Objective {
public:
  SineBump(double a, double b, Point minimizer)
      : Objective(std::move(minimizer)), a_(a), b_(b) {
    if (!(a_ >= 0.0) || !std::isfinite(b_))
      throw ConfigError("sine_bump: a must be >= 0 and b finite");
  }

  std::string family() const override { return "sine_bump"; }
  nlohmann::json params() const override { return {{"a", a_}, {"b", b_}}; }
  bool smooth() const override { return true; }
  // f'' = 2 + 2ab^2 cos(2b s) per coordinate.
  DeclaredConstants declared() const override {
    return {std::nullopt, std::nullopt, 2.0 + 2.0 * a_ * b_ * b_, std::nullopt};
  }

  double value(std::span<const double> x) const override {
    double s = 0.0;
    const Point &xs = minimizer();
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double d = x[i] - xs[i];
      const double sn = std::sin(b_ * d);
      s += d * d + a_ * sn * sn;
    }
    return s;
  }

  void gradient(std::span<const double> x,
                std::span<double> out) const override {
    const Point &xs = minimizer();
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double d = x[i] - xs[i];
      out[i] = 2.0 * d + a_ * b_ * std::sin(2.0 * b_ * d);
    }
  }

private:
  double a_;
  double b_;
};

class Plateau final : public Objective {
public:
  explicit Plateau(Point minimizer) : Objective(std::move(minimizer)) {}

  std::string family() const override { return "plateau"; }
  nlohmann::json params() const override { return nlohmann::json::object(); }
  bool smooth() const override { return false; }
  DeclaredConstants declared() const override {
    return {0.5, 0.0, std::nullopt,
            std::sqrt(static_cast<double>(dimension()))};
  }

  double value(std::span<const double> x) const override {
    double s = 0.0;
    const Point &xs = minimizer();
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double a = std::abs(x[i] - xs[i]);
      s += a <= 1.0 ? a : 1.0 + 0.5 * (a - 1.0);
    }
    return s;
  }

  void gradient(std::span<const double> x,
                std::span<double> out) const override {
    const Point &xs = minimizer();
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double d = x[i] - xs[i];
      out[i] = (std::abs(d) <= 1.0 ? 1.0 : 0.5) * sign(d);
    }
  }
};

class AbsRidge final : public Objective {
public:
  AbsRidge(double c, Point minimizer) : Objective(std::move(minimizer)), c_(c) {
    if (!(c_ >= 0.0))
      throw ConfigError("abs_ridge: c must be >= 0");
  }

  std::string family() const override { return "abs_ridge"; }
  nlohmann::json params() const override { return {{"c", c_}}; }
  bool smooth() const override { return false; }
  DeclaredConstants declared() const override {
    return {1.0, std::nullopt, std::nullopt, std::nullopt};
  }

  double value(std::span<const double> x) const override {
    double s = 0.0;
    const Point &xs = minimizer();
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double d = x[i] - xs[i];
      s += std::abs(d) + c_ * d * d;
    }
    return s;
  }

  void gradient(std::span<const double> x,
                std::span<double> out) const override {
    const Point &xs = minimizer();
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double d = x[i] - xs[i];
      out[i] = sign(d) + 2.0 * c_ * d;
    }
  }

private:
  double c_;
};

class StrongVariant final : public Objective {
public:
  StrongVariant(ObjectivePtr base, double mu_add)
      : Objective(base->minimizer(), base->min_value()), base_(std::move(base)),
        mu_add_(mu_add) {
    if (!(mu_add_ >= 0.0))
      throw ConfigError("strong_variant: mu_add must be >= 0");
  }

  std::string family() const override { return "strong_variant"; }
  nlohmann::json params() const override {
    return {{"mu_add", mu_add_}, {"base", to_json(*base_)}};
  }
  bool smooth() const override { return base_->smooth(); }

  // Adding (m/2)||x-x*||^2 raises the strong-quasar modulus by m(2/gamma - 1)
  // at the base gamma, and the Lipschitz constant by m.
  DeclaredConstants declared() const override {
    DeclaredConstants d = base_->declared();
    DeclaredConstants out;
    if (d.gamma) {
      out.gamma = d.gamma;
      out.mu = d.mu.value_or(0.0) + mu_add_ * (2.0 / *d.gamma - 1.0);
    }
    if (d.L)
      out.L = *d.L + mu_add_;
    return out;
  }

  double value(std::span<const double> x) const override {
    return base_->value(x) + 0.5 * mu_add_ * kernels::sq_dist(x, minimizer());
  }

  void gradient(std::span<const double> x,
                std::span<double> out) const override {
    base_->gradient(x, out);
    const Point &xs = minimizer();
    for (std::size_t i = 0; i < x.size(); ++i)
      out[i] += mu_add_ * (x[i] - xs[i]);
  }

private:
  ObjectivePtr base_;
  double mu_add_;
};

} // namespace

ObjectivePtr make_quadratic(std::vector<double> A, Point minimizer) {
  return std::make_shared<Quadratic>(std::move(A), std::move(minimizer), false);
}

ObjectivePtr make_quadratic_diag(std::vector<double> diag, Point minimizer) {
  return std::make_shared<Quadratic>(std::move(diag), std::move(minimizer),
                                     true);
}

ObjectivePtr make_sine_bump(double a, double b, Point minimizer) {
  return std::make_shared<SineBump>(a, b, std::move(minimizer));
}

ObjectivePtr make_plateau(Point minimizer) {
  return std::make_shared<Plateau>(std::move(minimizer));
}

ObjectivePtr make_abs_ridge(double c, Point minimizer) {
  return std::make_shared<AbsRidge>(c, std::move(minimizer));
}

ObjectivePtr make_strong_variant(ObjectivePtr base, double mu_add) {
  if (!base)
    throw ConfigError("strong_variant: missing base objective");
  return std::make_shared<StrongVariant>(std::move(base), mu_add);
}

// ---------------------------------------------------------------------------
// Serialization

nlohmann::json to_json(const Box &box) {
  return {{"lower", box.lower}, {"upper", box.upper}};
}

Box box_from_json(const nlohmann::json &j) {
  Box b{j.at("lower").get<Point>(), j.at("upper").get<Point>()};
  if (b.lower.size() != b.upper.size() || b.lower.empty())
    throw ConfigError("box: lower/upper must be non-empty and equal length");
  return b;
}

nlohmann::json to_json(const ConstantsCertificate &c) {
  return {{"gamma", c.gamma},
          {"mu", c.mu},
          {"L", c.L},
          {"G", c.G},
          {"R", c.R},
          {"box", to_json(c.box)},
          {"grid_points", c.grid_points},
          {"provenance", c.provenance == Provenance::analytic
                             ? "analytic"
                             : "grid-certified"}};
}

ConstantsCertificate certificate_from_json(const nlohmann::json &j) {
  ConstantsCertificate c;
  c.gamma = j.at("gamma").get<double>();
  c.mu = j.value("mu", 0.0);
  c.L = j.value("L", 0.0);
  c.G = j.value("G", 0.0);
  c.R = j.value("R", 0.0);
  if (j.contains("box"))
    c.box = box_from_json(j.at("box"));
  c.grid_points = j.value("grid_points", std::int64_t{0});
  const std::string prov = j.value("provenance", std::string("analytic"));
  if (prov == "analytic")
    c.provenance = Provenance::analytic;
  else if (prov == "grid-certified")
    c.provenance = Provenance::grid_certified;
  else
    throw ConfigError("certificate: unknown provenance '" + prov + "'");
  c.validate();
  return c;
}

nlohmann::json to_json(const Objective &f) {
  return {{"family", f.family()},
          {"params", f.params()},
          {"dimension", f.dimension()},
          {"minimizer", f.minimizer()}};
}

nlohmann::json to_json(const ProblemSpec &spec) {
  nlohmann::json j = to_json(*spec.objective);
  if (spec.certificate)
    j["certificate"] = to_json(*spec.certificate);
  return j;
}

ObjectivePtr objective_from_json(const nlohmann::json &j) {
  const std::string family = j.at("family").get<std::string>();
  const nlohmann::json params = j.value("params", nlohmann::json::object());
  Point xs;
  if (j.contains("minimizer")) {
    xs = j.at("minimizer").get<Point>();
  } else if (family != "strong_variant") {
    xs.assign(j.at("dimension").get<std::size_t>(), 0.0);
  }
  if (j.contains("dimension") && !xs.empty() &&
      j.at("dimension").get<std::size_t>() != xs.size())
    throw ConfigError("problem: dimension does not match minimizer");

  if (family == "quadratic") {
    if (params.contains("diag"))
      return make_quadratic_diag(params.at("diag").get<std::vector<double>>(),
                                 xs);
    return make_quadratic(params.at("A").get<std::vector<double>>(), xs);
  }
  if (family == "sine_bump")
    return make_sine_bump(params.value("a", 0.1), params.value("b", 5.0), xs);
  if (family == "plateau")
    return make_plateau(xs);
  if (family == "abs_ridge")
    return make_abs_ridge(params.value("c", 0.0), xs);
  if (family == "strong_variant") {
    auto base = objective_from_json(params.at("base"));
    if (!xs.empty() && xs != base->minimizer())
      throw ConfigError("strong_variant: minimizer must match the base");
    return make_strong_variant(std::move(base), params.at("mu_add").get<double>());
  }
  throw ConfigError("problem: unknown family '" + family + "'");
}

ProblemSpec problem_from_json(const nlohmann::json &j) {
  ProblemSpec spec{objective_from_json(j), std::nullopt};
  if (j.contains("certificate") && !j.at("certificate").is_null())
    spec.certificate = certificate_from_json(j.at("certificate"));
  return spec;
}

// ---------------------------------------------------------------------------
// Gap predicates

namespace {

void check_finite(double v, const char *what) {
  if (!std::isfinite(v))
    throw EvaluationError(std::string("non-finite ") + what);
}

} // namespace

double quasar_gap(const Objective &f, std::span<const double> x, double gamma) {
  if (!(gamma > 0.0 && gamma <= 1.0))
    throw ConfigError("quasar_gap: gamma must lie in (0, 1]");
  const Point &xs = f.minimizer();
  const double fx = f.value(x);
  check_finite(fx, "objective value");
  Point g = f.gradient(x);
  double inner = 0.0; // <grad f(x), x* - x>
  for (std::size_t i = 0; i < x.size(); ++i) {
    check_finite(g[i], "gradient");
    inner += g[i] * (xs[i] - x[i]);
  }
  return f.min_value() - fx - inner / gamma;
}

double strong_quasar_gap(const Objective &f, std::span<const double> x,
                         double gamma, double mu) {
  if (!(mu >= 0.0))
    throw ConfigError("strong_quasar_gap: mu must be >= 0");
  return quasar_gap(f, x, gamma) - 0.5 * mu * kernels::sq_dist(x, f.minimizer());
}

// ---------------------------------------------------------------------------
// Grid certification

namespace {

constexpr std::size_t kChunk = 4096;

// Tensor grid with the same number of nodes per axis, visited in row-major
// linear order so that reductions are reproducible.
class TensorGrid {
public:
  TensorGrid(const Box &box, std::int64_t grid_points) : box_(box) {
    const std::size_t n = box.dimension();
    if (n == 0)
      throw ConfigError("grid: empty box");
    if (grid_points < 2)
      throw ConfigError("grid: need at least 2 points");
    per_axis_ = static_cast<std::int64_t>(
        std::floor(std::pow(static_cast<double>(grid_points), 1.0 / n)));
    per_axis_ = std::max<std::int64_t>(per_axis_, 2);
    while (ipow(per_axis_, n) < grid_points)
      ++per_axis_;
    total_ = ipow(per_axis_, n);
  }

  std::int64_t size() const { return total_; }

  void point(std::int64_t linear, std::span<double> out) const {
    for (std::size_t k = out.size(); k-- > 0;) {
      const std::int64_t j = linear % per_axis_;
      linear /= per_axis_;
      const double t = static_cast<double>(j) / static_cast<double>(per_axis_ - 1);
      out[k] = box_.lower[k] + (box_.upper[k] - box_.lower[k]) * t;
    }
  }

private:
  static std::int64_t ipow(std::int64_t b, std::size_t e) {
    std::int64_t r = 1;
    for (std::size_t i = 0; i < e; ++i)
      r *= b;
    return r;
  }

  const Box &box_;
  std::int64_t per_axis_ = 0;
  std::int64_t total_ = 0;
};

void require_same_dimension(const Objective &f, const Box &box) {
  if (box.dimension() != f.dimension())
    throw ConfigError("certification box dimension does not match objective");
  if (!box.contains(f.minimizer()))
    throw ConfigError("certification box must contain the minimizer");
}

std::string format_point(std::span<const double> x) {
  std::ostringstream os;
  os.precision(17);
  os << '(';
  for (std::size_t i = 0; i < x.size(); ++i)
    os << (i ? ", " : "") << x[i];
  os << ')';
  return os.str();
}

// Per-point quantities consumed by the gamma and mu sweeps.
struct GridChunk {
  std::vector<double> inner; // <grad f(x), x - x*>
  std::vector<double> excess; // f(x) - f(x*)
  std::vector<double> dist_sq;

  void resize(std::size_t m) {
    inner.resize(m);
    excess.resize(m);
    dist_sq.resize(m);
  }
};

template <typename Visit>
void sweep_grid(const Objective &f, const Box &box, std::int64_t grid_points,
                Visit &&visit) {
  TensorGrid grid(box, grid_points);
  const std::size_t n = f.dimension();
  const Point &xs = f.minimizer();
  Point x(n), g(n);
  GridChunk chunk;
  for (std::int64_t start = 0; start < grid.size(); start += kChunk) {
    const auto m = static_cast<std::size_t>(
        std::min<std::int64_t>(kChunk, grid.size() - start));
    chunk.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
      grid.point(start + static_cast<std::int64_t>(i), x);
      const double fx = f.value(x);
      f.gradient(x, g);
      double ip = 0.0, d2 = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        const double d = x[k] - xs[k];
        ip += g[k] * d;
        d2 += d * d;
      }
      if (!std::isfinite(fx) || !std::isfinite(ip))
        throw EvaluationError("non-finite evaluation at grid point " +
                              format_point(x));
      chunk.inner[i] = ip;
      chunk.excess[i] = fx - f.min_value();
      chunk.dist_sq[i] = d2;
    }
    visit(start, chunk);
  }
}

} // namespace

GridResult certify_gamma(const Objective &f, const Box &box,
                         std::int64_t grid_points) {
  require_same_dimension(f, box);
  TensorGrid grid(box, grid_points);
  kernels::Extremum best{1.0};
  std::int64_t best_index = -1;
  sweep_grid(f, box, grid_points, [&](std::int64_t start, const GridChunk &c) {
    for (std::size_t i = 0; i < c.inner.size(); ++i) {
      if (c.excess[i] > 0.0 && c.inner[i] <= 0.0) {
        Point w(f.dimension());
        grid.point(start + static_cast<std::int64_t>(i), w);
        throw CertificationError(
            "not quasar-convex on the box: <grad f(x), x - x*> <= 0 at " +
                format_point(w),
            w);
      }
    }
    const auto e = kernels::min_ratio(c.inner, c.excess, 0.0);
    if (e.found() && e.value < best.value) {
      best.value = e.value;
      best_index = start + static_cast<std::int64_t>(e.index);
    }
  });
  GridResult out{std::min(1.0, best.value), {}};
  if (best_index >= 0) {
    out.worst.resize(f.dimension());
    grid.point(best_index, out.worst);
  }
  return out;
}

GridResult certify_mu(const Objective &f, double gamma, const Box &box,
                      std::int64_t grid_points) {
  if (!(gamma > 0.0 && gamma <= 1.0))
    throw ConfigError("certify_mu: gamma must lie in (0, 1]");
  require_same_dimension(f, box);
  TensorGrid grid(box, grid_points);
  constexpr double kExcludedRadiusSq = 1e-12;
  kernels::Extremum best{std::numeric_limits<double>::infinity()};
  std::int64_t best_index = -1;
  std::vector<double> num;
  sweep_grid(f, box, grid_points, [&](std::int64_t start, const GridChunk &c) {
    num.resize(c.inner.size());
    for (std::size_t i = 0; i < num.size(); ++i)
      num[i] = 2.0 * (c.inner[i] / gamma - c.excess[i]);
    const auto e = kernels::min_ratio(num, c.dist_sq, kExcludedRadiusSq);
    if (e.found() && e.value < best.value) {
      best.value = e.value;
      best_index = start + static_cast<std::int64_t>(e.index);
    }
  });
  GridResult out{0.0, {}};
  if (best_index >= 0) {
    out.value = std::max(0.0, best.value);
    out.worst.resize(f.dimension());
    grid.point(best_index, out.worst);
  }
  return out;
}

GridResult certify_L(const Objective &f, const Box &box, std::int64_t samples,
                     std::uint64_t seed) {
  if (!f.smooth())
    throw ConfigError("certify_L: " + f.family() +
                      " is non-smooth; certify G instead");
  require_same_dimension(f, box);
  if (samples < 1)
    throw ConfigError("certify_L: samples must be >= 1");
  const std::size_t n = f.dimension();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto draw = [&](Point &x) {
    for (std::size_t k = 0; k < n; ++k)
      x[k] = box.lower[k] + (box.upper[k] - box.lower[k]) * unit(rng);
  };
  double width = 0.0;
  for (std::size_t k = 0; k < n; ++k)
    width = std::max(width, box.upper[k] - box.lower[k]);
  const double h = 1e-5 * width;

  Point x(n), y(n), gx(n), gy(n), worst;
  std::vector<double> num(kChunk), den(kChunk);
  std::vector<Point> centers(kChunk, Point(n));
  kernels::Extremum best{-std::numeric_limits<double>::infinity()};
  for (std::int64_t start = 0; start < samples; start += kChunk) {
    const auto m = static_cast<std::size_t>(
        std::min<std::int64_t>(kChunk, samples - start));
    for (std::size_t i = 0; i < m; ++i) {
      const std::int64_t s = start + static_cast<std::int64_t>(i);
      draw(x);
      switch (s % 3) {
      case 0: // uniform pair
        draw(y);
        break;
      case 1: { // near-coincident pair, random direction
        double norm = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          y[k] = normal(rng);
          norm += y[k] * y[k];
        }
        norm = std::sqrt(norm);
        for (std::size_t k = 0; k < n; ++k)
          y[k] = x[k] + h * y[k] / norm;
        break;
      }
      default: { // coordinate-direction curvature probe
        y = x;
        y[static_cast<std::size_t>(s / 3) % n] += h;
        break;
      }
      }
      for (std::size_t k = 0; k < n; ++k)
        y[k] = std::clamp(y[k], box.lower[k], box.upper[k]);
      f.gradient(x, gx);
      f.gradient(y, gy);
      num[i] = std::sqrt(kernels::sq_dist(gx, gy));
      den[i] = std::sqrt(kernels::sq_dist(x, y));
      centers[i] = x;
    }
    const auto e = kernels::max_ratio(std::span(num).first(m),
                                      std::span(den).first(m), 0.0);
    if (e.found() && e.value > best.value) {
      best = e;
      worst = centers[e.index];
    }
  }
  if (!best.found() && worst.empty())
    throw CertificationError("certify_L: no usable sample pairs", {});
  return {best.value * kSafetyMargin, worst};
}

GridResult certify_G(const Objective &f, const Box &box, std::int64_t samples,
                     std::uint64_t seed) {
  require_same_dimension(f, box);
  const std::size_t n = f.dimension();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Point> points;
  if (n <= 16) {
    for (std::uint64_t mask = 0; mask < (1ULL << n); ++mask) {
      Point v(n);
      for (std::size_t k = 0; k < n; ++k)
        v[k] = (mask >> k) & 1ULL ? box.upper[k] : box.lower[k];
      points.push_back(std::move(v));
    }
  }
  points.push_back(f.minimizer());
  for (std::int64_t s = 0; s < samples; ++s) {
    Point v(n);
    for (std::size_t k = 0; k < n; ++k)
      v[k] = box.lower[k] + (box.upper[k] - box.lower[k]) * unit(rng);
    points.push_back(std::move(v));
  }
  std::vector<double> norms(points.size());
  Point g(n);
  for (std::size_t i = 0; i < points.size(); ++i) {
    f.gradient(points[i], g);
    norms[i] = std::sqrt(kernels::sum_sq(g));
    if (!std::isfinite(norms[i]))
      throw EvaluationError("certify_G: non-finite gradient at " +
                            format_point(points[i]));
  }
  const auto e = kernels::max_value(norms);
  return {e.value * kSafetyMargin, points[e.index]};
}

CertificationReport certify(const Objective &f, const Box &box,
                            const CertifyOptions &options) {
  const DeclaredConstants declared =
      options.use_declared ? f.declared() : DeclaredConstants{};
  CertificationReport report;
  bool all_analytic = true;

  const GridResult gamma_grid = certify_gamma(f, box, options.grid_points);
  report.gamma_grid = gamma_grid.value;
  report.worst_point_gamma = gamma_grid.worst;

  double gamma = gamma_grid.value;
  if (options.gamma) {
    if (!(*options.gamma > 0.0 && *options.gamma <= gamma_grid.value + 1e-12))
      throw CertificationError(
          "requested gamma exceeds the grid-certified value", gamma_grid.worst);
    gamma = *options.gamma;
    all_analytic = false;
  } else if (declared.gamma) {
    if (*declared.gamma > gamma_grid.value + 1e-6)
      throw CertificationError("declared gamma is violated on the grid",
                               gamma_grid.worst);
    gamma = *declared.gamma;
  } else {
    all_analytic = false;
  }

  const GridResult mu_grid = certify_mu(f, gamma, box, options.grid_points);
  report.mu_grid = mu_grid.value;
  report.worst_point_mu = mu_grid.worst;
  double mu = mu_grid.value;
  if (declared.mu && !options.gamma) {
    mu = std::min(*declared.mu, mu_grid.value + 1e-9 * (1.0 + *declared.mu));
  } else {
    all_analytic = false;
  }

  ConstantsCertificate cert;
  cert.gamma = gamma;
  cert.mu = mu;
  cert.box = box;
  cert.grid_points = options.grid_points;

  if (f.smooth()) {
    report.L_sampled = certify_L(f, box, options.samples).value;
    if (declared.L) {
      cert.L = *declared.L;
    } else {
      cert.L = report.L_sampled;
      all_analytic = false;
    }
  }
  report.G_sampled = certify_G(f, box, options.samples).value;
  if (!f.smooth()) {
    cert.G = report.G_sampled;
    all_analytic = false;
  }
  cert.provenance =
      all_analytic ? Provenance::analytic : Provenance::grid_certified;

  // Smallest strong-quasar gap under the final constants.
  double min_gap = std::numeric_limits<double>::infinity();
  sweep_grid(f, box, options.grid_points,
             [&](std::int64_t, const GridChunk &c) {
               for (std::size_t i = 0; i < c.inner.size(); ++i) {
                 const double gap = c.inner[i] / gamma - c.excess[i] -
                                    0.5 * mu * c.dist_sq[i];
                 min_gap = std::min(min_gap, gap);
               }
             });
  report.min_gap = min_gap;
  report.certificate = cert;
  return report;
}

} // namespace qb
