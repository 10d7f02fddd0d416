#include <gtest/gtest.h>

#include <cmath>

#include "insurer/model.hpp"
#include "test_support.hpp"

using namespace insurer;
using namespace insurer::testing;

TEST(GridFunction, PiecewiseConstantLookupAndIntegral) {
  const GridFunction g({1.0, 2.0, 4.0, 8.0}, 2.0);
  EXPECT_DOUBLE_EQ(g.step(), 0.5);
  EXPECT_EQ(g.at(0.0), 1.0);
  EXPECT_EQ(g.at(0.49), 1.0);
  EXPECT_EQ(g.at(0.5), 2.0);
  EXPECT_EQ(g.at(2.0), 8.0);
  EXPECT_DOUBLE_EQ(g.integral(0.0, 2.0), 0.5 * (1 + 2 + 4 + 8));
  EXPECT_DOUBLE_EQ(g.integral(0.25, 1.25), 0.25 * 1 + 0.5 * 2 + 0.25 * 4);
  EXPECT_EQ(g.integral(1.0, 1.0), 0.0);
}

TEST(GridFunction, RejectsEmptyGridAndBadHorizon) {
  EXPECT_THROW(GridFunction({}, 1.0), std::invalid_argument);
  EXPECT_THROW(GridFunction({1.0}, 0.0), std::invalid_argument);
}

TEST(Market, GrowthToHorizonUsesPiecewiseRates) {
  const MarketCoefficients m(GridFunction({0.01, 0.03}, 2.0), GridFunction({0.1, 0.1}, 2.0),
                             GridFunction({0.2, 0.2}, 2.0));
  EXPECT_NEAR(m.growth_to_horizon(0.0), std::exp(0.01 + 0.03), 1e-15);
  EXPECT_NEAR(m.growth_to_horizon(1.5), std::exp(0.5 * 0.03), 1e-15);
  EXPECT_EQ(m.growth_to_horizon(2.0), 1.0);
}

TEST(Validation, ReferenceParametersAreValid) {
  const ValidationReport r = validate_params(reference_market(), reference_risk());
  EXPECT_TRUE(r.ok());
  EXPECT_TRUE(r.warnings.empty());
}

TEST(Validation, MuEqualToRIsReported) {
  const auto m = MarketCoefficients::constant(0.02, 0.02, 0.2, 1.0);
  const ValidationReport r = validate_params(m, reference_risk());
  ASSERT_EQ(r.violations.size(), 1u);
  EXPECT_NE(r.violations[0].find("mu>r fails"), std::string::npos);
}

TEST(Validation, PremiumEqualToClaimDriftIsReported) {
  RiskParams k = reference_risk();
  k.p = 0.1;
  const ValidationReport r = validate_params(reference_market(), k);
  ASSERT_EQ(r.violations.size(), 1u);
  EXPECT_EQ(r.violations[0], "p>a fails");
}

TEST(Validation, ReportsEveryViolationAtOnce) {
  const MarketCoefficients m(GridFunction({0.02, -0.01}, 1.0), GridFunction({0.01, 0.08}, 1.0),
                             GridFunction({0.2, 0.0}, 1.0));
  RiskParams k = reference_risk();
  k.p = 0.05;
  k.rho = 1.0;
  const ValidationReport r = validate_params(m, k);
  // mu>r at point 0; sigma>0 and r>=0 at point 1; p>a; rho range.
  EXPECT_EQ(r.violations.size(), 5u);
}

TEST(Validation, NonNegativeCorrelationWarnsOnly) {
  RiskParams k = reference_risk();
  k.rho = 0.0;
  const ValidationReport r = validate_params(reference_market(), k);
  EXPECT_TRUE(r.ok());
  EXPECT_EQ(r.warnings.size(), 1u);
}

TEST(TechnicalCondition, ReferenceMargin) {
  const ConditionMargin c = technical_condition_margin(reference_market(), reference_risk());
  EXPECT_NEAR(c.min, frozen::margin, 1e-15);
  EXPECT_TRUE(c.holds());
}

TEST(TechnicalCondition, ExactCancellationGivesZero) {
  RiskParams k{0.2, 0.1, 0.15, 0.2, 0.5, 0.0};  // p - a = lambda gamma = 0.1
  const ConditionMargin c = technical_condition_margin(reference_market(), k);
  EXPECT_EQ(c.min, 0.0);
  EXPECT_FALSE(c.holds());
  EXPECT_EQ(c.failing_points().size(), 1u);
}

TEST(TechnicalCondition, ReportsArgminOnTimeVaryingGrid) {
  const MarketCoefficients m(GridFunction({0.02, 0.02, 0.02}, 3.0), GridFunction({0.08, 0.3, 0.1}, 3.0),
                             GridFunction({0.2, 0.2, 0.2}, 3.0));
  const ConditionMargin c = technical_condition_margin(m, reference_risk());
  EXPECT_EQ(c.argmin, 1u);
  EXPECT_DOUBLE_EQ(c.t_argmin, 1.0);
}

TEST(TechnicalCondition, DecreasingInLambdaAndGamma) {
  const auto m = reference_market();
  RiskParams k = reference_risk();
  double prev = technical_condition_margin(m, k).min;
  for (int i = 0; i < 20; ++i) {
    k.lambda += 0.05;
    const double c = technical_condition_margin(m, k).min;
    EXPECT_LT(c, prev);
    prev = c;
  }
  k = reference_risk();
  prev = technical_condition_margin(m, k).min;
  for (int i = 0; i < 20; ++i) {
    k.gamma += 0.05;
    const double c = technical_condition_margin(m, k).min;
    EXPECT_LT(c, prev);
    prev = c;
  }
}

TEST(LogObjective, FrozenValue) {
  EXPECT_NEAR(log_objective(0.5, 0.5, 0.0, reference_market(), reference_risk()), frozen::f_half_half,
              1e-16);
}

TEST(LogObjective, ZeroControlsEarnTheRiskFreeRate) {
  EXPECT_EQ(log_objective(0.0, 0.0, reference_market().point(0), reference_risk()), 0.02);
}

TEST(LogObjective, RejectsBankruptcyAtJump) {
  const auto k = reference_risk();
  EXPECT_THROW(log_objective(1.0, 1.0 / k.gamma, reference_market().point(0), k), DomainError);
  EXPECT_THROW(log_objective(1.0, 4.0, reference_market().point(0), k), DomainError);
}

TEST(LogObjective, HessianMatchesFiniteDifferencesAndIsNegativeDefinite) {
  ParamSampler sampler(11);
  for (int n = 0; n < 200; ++n) {
    const ParamSet s = sampler.next();
    const MarketPoint m = s.market.point(0);
    const double pi = sampler.uniform(-1.0, 3.0);
    const double kappa = sampler.uniform(0.0, 0.9 / s.risk.gamma);
    const Hessian2 h = log_objective_hessian(kappa, m, s.risk);
    const double e = 1e-4;
    auto f = [&](double x, double y) { return log_objective(x, y, m, s.risk); };
    const double fpp = (f(pi + e, kappa) - 2 * f(pi, kappa) + f(pi - e, kappa)) / (e * e);
    const double fkk = (f(pi, kappa + e) - 2 * f(pi, kappa) + f(pi, kappa - e)) / (e * e);
    const double fpk =
        (f(pi + e, kappa + e) - f(pi + e, kappa - e) - f(pi - e, kappa + e) + f(pi - e, kappa - e)) /
        (4 * e * e);
    EXPECT_NEAR(h.pp, fpp, 1e-5 * (1 + std::abs(fpp)));
    EXPECT_NEAR(h.kk, fkk, 1e-5 * (1 + std::abs(fkk)));
    EXPECT_NEAR(h.pk, fpk, 1e-5 * (1 + std::abs(fpk)));
    EXPECT_TRUE(h.negative_definite());
    const double slack = 1 - s.risk.gamma * kappa;
    const double det = (1 - s.risk.rho * s.risk.rho) * s.risk.b * s.risk.b * m.sigma * m.sigma +
                       s.risk.lambda * s.risk.gamma * s.risk.gamma * m.sigma * m.sigma / (slack * slack);
    EXPECT_NEAR(h.det(), det, 1e-14);
  }
}
