#include "qb/schedules.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>

using namespace qb;

namespace {

void expect_rel(double got, double want, double rel = 1e-9) {
  EXPECT_LE(std::abs(got - want), rel * std::abs(want))
      << "got " << got << " want " << want;
}

const std::int64_t kLogGrid[] = {10, 31, 100, 316, 1000, 3162, 10000, 31623,
                                 100000, 316228, 1000000};

} // namespace

TEST(QcConstant, Alpha) {
  expect_rel(qc_constant_alpha(1, 2, 1, 100), 0.025);
  expect_rel(qc_constant_alpha(1, 1, 10, 50), 0.05);
  expect_rel(qc_constant_alpha(1, 0, 3, 1000), 1.0 / 6.0);
  // boundary T = R^2 L^2 / sigma^2 is not strictly above: 1/(2L)
  expect_rel(qc_constant_alpha(1, 1, 10, 100), 0.05);
}

TEST(QcConstant, AlphaNeverExceedsHalfInverseL) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-3, 3);
  for (int k = 0; k < 20000; ++k) {
    const double R = std::pow(10, u(rng)), s = std::pow(10, u(rng)),
                 L = std::pow(10, u(rng));
    const auto T = static_cast<std::int64_t>(std::pow(10, 3 + u(rng)));
    EXPECT_LE(qc_constant_alpha(R, s, L, std::max<std::int64_t>(T, 1)),
              1.0 / (2.0 * L));
  }
}

TEST(QcBound, HandValues) {
  expect_rel(qc_bound(100, 1, 1, 1, 1), 0.44);
  expect_rel(qc_bound(4, 1, 0, 1, 1), 1.0);
  expect_rel(qc_bound(100, 1, 1, 1, 0.5), 0.88);
}

TEST(QcIterations, InverseOfBound) {
  const double b100 = qc_bound(100, 1, 1, 1, 1);
  EXPECT_EQ(qc_iterations(b100, 1, 1, 1, 1), 100);
  EXPECT_EQ(qc_iterations(qc_bound(1, 1, 1, 1, 1), 1, 1, 1, 1), 1);
  EXPECT_EQ(qc_iterations(1.0, 1, 0, 1, 1), 4);

  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-2, 2);
  for (int k = 0; k < 500; ++k) {
    const double R = std::pow(10, u(rng) / 2), s = std::pow(10, u(rng) / 2),
                 L = std::pow(10, u(rng) / 2), g = std::clamp(std::pow(10, u(rng) / 4), 0.05, 1.0);
    const double eps = std::pow(10, u(rng) / 2);
    const auto T = qc_iterations(eps, R, s, L, g);
    ASSERT_GE(T, 1);
    EXPECT_LE(qc_bound(T, R, s, L, g), eps);
    if (T > 1)
      EXPECT_GT(qc_bound(T - 1, R, s, L, g), eps);
  }
}

TEST(SqcLog, AlphaAndThreshold) {
  expect_rel(sqc_log_alpha(1, 1, 1, 1, 1, 100), std::log(100.0) / 100.0);
  EXPECT_NEAR(sqc_log_alpha(1, 1, 1, 1, 1, 100), 0.04605, 5e-6);
  expect_rel(sqc_log_alpha(1, 1, 1, 1, 1, 200), std::log(200.0) / 200.0);
  EXPECT_NEAR(sqc_log_alpha(1, 1, 1, 1, 1, 200), 0.0265, 5e-5);

  // max{3, 6 (ln 2 + 1)} = 10.158...
  EXPECT_NEAR(6.0 * (std::log(2.0) + 1.0), 10.16, 5e-3);
  EXPECT_EQ(sqc_min_T(1, 1, 1, 1, 1), 11);
  try {
    sqc_log_alpha(1, 1, 1, 1, 1, 10);
    FAIL() << "T=10 must be rejected";
  } catch (const RegimeError &e) {
    EXPECT_EQ(e.minimal_T(), 11);
  }
  EXPECT_NO_THROW(sqc_log_alpha(1, 1, 1, 1, 1, 11));
  EXPECT_THROW(sqc_log_alpha(1, 1, 1, 0, 1, 1000), RegimeError);
}

TEST(SqcBound, HandValueAndClosedForm) {
  const double a = std::log(100.0) / 100.0;
  const double q = std::pow(1 - a, 100);
  const double want = (a / (2 * (1 - a)) + q / (2 * (1 - a))) / (1 - q);
  expect_rel(sqc_bound(100, 1, 1, 1, 1, 1), want);
  EXPECT_NEAR(sqc_bound(100, 1, 1, 1, 1, 1), 0.0291, 5e-5);
  EXPECT_NEAR(q, 0.009, 5e-4);
}

TEST(SqcBound, NoiselessLimitAndMonotone) {
  const double a = 0.01;
  const double q = std::pow(1 - a, 50);
  expect_rel(sqc_bound_at(50, a, 1, 1, 1, 1, 0.0), q / (2 * (1 - a) * (1 - q)));
  double prev = std::numeric_limits<double>::infinity();
  for (std::int64_t T = 11; T <= 10000; ++T) {
    const double b = sqc_bound(T, 1, 1, 1, 1, 1);
    EXPECT_LE(b, prev) << T;
    prev = b;
  }
  EXPECT_THROW(sqc_bound_at(10, 2.0, 1, 0.1, 1, 1, 1), RegimeError); // gamma <= alpha L
}

TEST(Gower, AlphaAndBounds) {
  expect_rel(gower_alpha(1, 1, 1, 1, 200), std::log(100.0) / 200.0);
  EXPECT_NEAR(gower_alpha(1, 1, 1, 1, 200), 0.02303, 5e-6);
  expect_rel(gower_alpha(1, 1, 1, 1, 20000), std::log(1e4) / 2e4);
  EXPECT_NEAR(gower_alpha(1, 1, 1, 1, 20000), 4.605e-4, 5e-8);
  EXPECT_THROW(gower_alpha(1, 1, 1, std::sqrt(100.0), 200), RegimeError);

  const double a = 0.02303;
  expect_rel(gower_distance_bound(200, 1, 1, 1, 1, a),
             std::exp(-a * 200) + 2 * a);
  const double a_exact = gower_alpha(1, 1, 1, 1, 200);
  expect_rel(gower_distance_bound(200, 1, 1, 1, 1, a_exact), 0.01 + std::log(100.0) / 100.0);
  EXPECT_NEAR(gower_distance_bound(200, 1, 1, 1, 1, a_exact), 0.0561, 5e-5);
  EXPECT_NEAR(gower_distance_bound(10, 1, 1, 1, 0, 1e-9), 1.0, 1e-6);
}

TEST(Gower, ComparisonBound) {
  const double a = 0.05;
  const double want = 1.0 / (2 * 100 * a * (1 - a)) + a / (1 - a);
  expect_rel(gower_appendix_bound(100, 1, 1, 1, 1, 0.5), want);
  EXPECT_NEAR(gower_appendix_bound(100, 1, 1, 1, 1, 0.5), 0.158, 5e-4);
  expect_rel(gower_appendix_bound(100, 1, 0, 1, 1, 0.5), 1.0 / (2 * 100 * a * (1 - a)));
  EXPECT_THROW(gower_appendix_bound(1, 1, 1, 1, 1, 1.5), RegimeError);
}

TEST(Nonsmooth, HandValues) {
  expect_rel(nonsmooth_alpha(1, 1, 100), 0.1);
  expect_rel(nonsmooth_alpha(2, 1, 400), 0.1);
  expect_rel(nonsmooth_alpha(3, 2, 1), 1.5);
  expect_rel(nonsmooth_harmonic_alpha(1, 1, 1), 1.0);
  expect_rel(nonsmooth_harmonic_alpha(0.5, 2, 10), 0.1);
  for (std::int64_t t = 1; t < 1000; ++t)
    EXPECT_LT(nonsmooth_harmonic_alpha(0.5, 3, t + 1), nonsmooth_harmonic_alpha(0.5, 3, t));
  expect_rel(nonsmooth_bound(100, 1, 1, 1), 0.1);
  expect_rel(nonsmooth_bound(100, 1, 1, 0.5), 0.2);
  expect_rel(nonsmooth_bound(400, 1, 1, 1), 0.05);
  expect_rel(nonsmooth_harmonic_distance_bound(10, 1.0, 0.5, 2.0), 0.1);
}

TEST(Bounds, PositiveFiniteNonIncreasing) {
  std::vector<std::pair<const char *, std::function<double(std::int64_t)>>> evals = {
      {"qc", [](std::int64_t T) { return qc_bound(T, 1, 1, 1, 1); }},
      {"qc0", [](std::int64_t T) { return qc_bound(T, 2, 0, 3, 0.5); }},
      {"sqc", [](std::int64_t T) { return sqc_bound(T, 1, 1, 1, 1, 1); }},
      {"gower", [](std::int64_t T) {
         return gower_distance_bound(T, 1, 1, 1, 1, gower_alpha(1, 1, 1, 1, T));
       }},
      {"appendix", [](std::int64_t T) { return gower_appendix_bound(T, 1, 1, 1, 1, 0.5); }},
      {"nonsmooth", [](std::int64_t T) { return nonsmooth_bound(T, 1, 1.05, 0.5); }},
      {"harmonic", [](std::int64_t T) { return nonsmooth_harmonic_distance_bound(T, 1, 0.5, 3); }},
  };
  for (const auto &[name, f] : evals) {
    double prev = std::numeric_limits<double>::infinity();
    int evaluated = 0;
    for (auto T : kLogGrid) {
      double b;
      try {
        b = f(T);
      } catch (const RegimeError &) {
        // only short horizons may fall outside the regime
        EXPECT_EQ(evaluated, 0) << name << " T=" << T;
        continue;
      }
      ++evaluated;
      EXPECT_TRUE(std::isfinite(b) && b > 0) << name << " T=" << T;
      EXPECT_LE(b, prev) << name << " T=" << T;
      prev = b;
    }
    EXPECT_GE(evaluated, 5) << name;
  }
}

TEST(GradFromSubopt, HandValues) {
  expect_rel(grad_from_subopt(0.1, 1), 0.005);
  expect_rel(grad_from_subopt(0.2, 1), 4 * grad_from_subopt(0.1, 1));
  expect_rel(grad_from_subopt(0.1, 4), grad_from_subopt(0.1, 1) / 4);
}

TEST(Splits, Deterministic) {
  const PhasePlan p = split_det(0.1, 1, 1, 1);
  expect_rel(p.epsilon1, std::cbrt(1e-4));
  EXPECT_NEAR(p.epsilon1, 0.0464, 5e-5);
  EXPECT_EQ(p.stage2_iters, 10);
  expect_rel(p.stage2_alpha, 1.0);
  EXPECT_EQ(p.stage1_iters, qc_iterations(p.epsilon1, 1, 0, 1, 1));
  expect_rel(split_det(0.05, 1, 1, 1).epsilon1, p.epsilon1 * std::pow(2.0, -4.0 / 3.0));
  expect_rel(split_det(0.1, 0.125, 1, 1).epsilon1, 2 * p.epsilon1);
  EXPECT_GE(p.stage1_iters, 1);
  // epsilon1 decreasing as the target tightens
  EXPECT_LT(split_det(0.01, 1, 1, 1).epsilon1, p.epsilon1);
}

TEST(Splits, StochasticQuasarConvex) {
  const PhasePlan p = split_sto(0.1, 1, 1, 1, 1);
  expect_rel(p.epsilon1, std::cbrt(1e-4));
  const double t1 = 1.0 / (p.epsilon1 * p.epsilon1);
  const double t3 = p.epsilon1 / 1e-4;
  expect_rel(p.stage1_leading, t1);
  expect_rel(p.stage2_leading, t3);
  EXPECT_NEAR(p.stage1_leading, 464, 0.5);
  EXPECT_NEAR(p.stage2_leading, 464, 0.5);
  EXPECT_LE(std::abs(p.stage1_leading - p.stage2_leading) / p.stage1_leading, 0.01);
  EXPECT_EQ(p.stage1_iters, qc_iterations(p.epsilon1, 1, 1, 1, 1));
  EXPECT_EQ(p.stage2_iters,
            static_cast<std::int64_t>(std::ceil(kStage2SgdConstant * p.stage2_leading)));
  expect_rel(p.stage2_alpha, stage2_sgd_alpha(p.epsilon1, 1, 1, p.stage2_iters));
  EXPECT_EQ(p.constants.at("stage2_sgd_constant"), kStage2SgdConstant);

  const PhasePlan h = split_sto(0.05, 1, 1, 1, 1);
  expect_rel(h.stage1_leading + h.stage2_leading,
             (p.stage1_leading + p.stage2_leading) * std::pow(2.0, 8.0 / 3.0), 1e-9);

  const PhasePlan d = split_sto(0.1, 1, 1, 1, 0);
  const PhasePlan dd = split_det(0.1, 1, 1, 1);
  EXPECT_EQ(d.epsilon1, dd.epsilon1);
  EXPECT_EQ(d.stage1_iters, dd.stage1_iters);
  EXPECT_EQ(d.stage2_iters, dd.stage2_iters);
}

TEST(Splits, StochasticStronglyQuasarConvex) {
  const PhasePlan p = split_sqc(0.1, 1, 1, 1, 1, 1);
  expect_rel(p.epsilon1, 0.01);
  expect_rel(p.stage1_leading, 100);
  expect_rel(p.stage2_leading, 100);
  EXPECT_EQ(p.stage1_iters, sqc_iterations(p.epsilon1, 1, 1, 1, 1, 1));
  const PhasePlan q = split_sqc(0.1, 1, 1, 4, 1, 1);
  expect_rel(q.epsilon1, 0.005);
  expect_rel(q.stage1_leading + q.stage2_leading,
             2 * (p.stage1_leading + p.stage2_leading));
}

TEST(StepSchedule, KindsAndRegimes) {
  ScheduleParams p;
  p.R = p.sigma = p.L = p.gamma = p.mu = p.G = 1.0;
  EXPECT_NEAR(StepSchedule(ScheduleKind::qc_constant, p, 100).alpha(7), 0.05, 1e-15);
  EXPECT_THROW(StepSchedule(ScheduleKind::sqc_log, p, 10), RegimeError);
  StepSchedule h(ScheduleKind::nonsmooth_harmonic, p, 100);
  EXPECT_FALSE(h.constant());
  EXPECT_DOUBLE_EQ(h.alpha(4), 0.25);
  p.alpha = 0.3;
  EXPECT_DOUBLE_EQ(StepSchedule(ScheduleKind::fixed, p, 5).alpha(5), 0.3);
  p.alpha = 0.0;
  EXPECT_THROW(StepSchedule(ScheduleKind::fixed, p, 5), ConfigError);
  for (auto k : {ScheduleKind::qc_constant, ScheduleKind::sqc_log, ScheduleKind::gower_log,
                 ScheduleKind::nonsmooth_constant, ScheduleKind::nonsmooth_harmonic,
                 ScheduleKind::fixed})
    EXPECT_EQ(schedule_kind_from_string(to_string(k)), k);
  EXPECT_THROW(schedule_kind_from_string("adam"), ConfigError);
}

TEST(StepSchedule, Pure) {
  for (int rep = 0; rep < 3; ++rep) {
    EXPECT_EQ(sqc_bound(1234, 0.7, 0.3, 2.0, 1.5, 0.8), sqc_bound(1234, 0.7, 0.3, 2.0, 1.5, 0.8));
    EXPECT_EQ(qc_iterations(0.01, 1, 1, 1, 1), qc_iterations(0.01, 1, 1, 1, 1));
  }
}
