#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "insurer/evaluation.hpp"
#include "test_support.hpp"

using namespace insurer;
using namespace insurer::testing;

TEST(Estimate, MeanStderrAndInterval) {
  const std::vector<double> v{1.0, 2.0, 3.0, 4.0};
  const MCEstimate e = make_estimate(v);
  EXPECT_DOUBLE_EQ(e.mean, 2.5);
  EXPECT_DOUBLE_EQ(e.std_error, std::sqrt((1.5 * 1.5 * 2 + 0.5 * 0.5 * 2) / 3.0 / 4.0));
  EXPECT_DOUBLE_EQ(e.mean - e.lower(), e.upper() - e.mean);
  EXPECT_EQ(e.confidence.z, 2.576);
  EXPECT_EQ(make_estimate(std::vector<double>{5.0}).std_error, 0.0);
  EXPECT_THROW(make_estimate(std::vector<double>{}), std::invalid_argument);
}

TEST(Estimate, ConfigurableLevel) {
  EXPECT_NEAR(ConfidenceLevel::of(0.99).z, 2.5758293035489, 1e-10);
  EXPECT_NEAR(ConfidenceLevel::of(0.95).z, 1.9599639845401, 1e-10);
  EXPECT_THROW(ConfidenceLevel::of(1.0), std::invalid_argument);
}

TEST(Estimate, InvariantUnderReorderingAndPartitioning) {
  const SimConfig cfg{1.0, 1.0, 16, 5000, 31};
  const auto u = fractional_control(solve_log(reference_market(), reference_risk()), 16);
  PathSet a = simulate_fractional(u, cfg, reference_market(), reference_risk(), {1, false});
  const PathSet b = simulate_fractional(u, cfg, reference_market(), reference_risk(), {3, false});
  const MCEstimate ea = estimate_expected_utility(a, LogUtility{});
  EXPECT_EQ(ea.mean, estimate_expected_utility(b, LogUtility{}).mean);
  std::reverse(a.terminal.begin(), a.terminal.end());
  std::rotate(a.terminal.begin(), a.terminal.begin() + 1234, a.terminal.end());
  EXPECT_NEAR(estimate_expected_utility(a, LogUtility{}).mean, ea.mean, 1e-12);
}

TEST(ExpectedUtility, RisklessControlHasNoVariance) {
  const SimConfig cfg{2.0, 1.0, 16, 1000, 31};
  const PathSet p = simulate_fractional(FractionalControl::constant(0, 0, 16), cfg, reference_market(),
                                        reference_risk());
  const MCEstimate e = estimate_expected_utility(p, LogUtility{});
  EXPECT_NEAR(e.mean, std::log(2.0) + 0.02, 1e-15);
  EXPECT_EQ(e.std_error, 0.0);
}

TEST(ExpectedUtility, BlissValueOfQuadratic) {
  PathSet p;
  p.terminal.assign(10, 1.0 / 0.4);
  EXPECT_EQ(estimate_expected_utility(p, QuadraticUtility{0.4}).mean, 1.0 / (2 * 0.4));
}

TEST(ExpectedUtility, DomainErrorNamesPaths) {
  PathSet p;
  p.terminal = {1.0, -0.5, 2.0, 0.0};
  try {
    estimate_expected_utility(p, LogUtility{});
    FAIL();
  } catch (const DomainError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("2 path(s)"), std::string::npos);
    EXPECT_NE(msg.find(" 1 3"), std::string::npos);
  }
  EXPECT_NO_THROW(estimate_expected_utility(p, ExponentialUtility{1.0}));
}

TEST(ExpectedUtility, LogOptimalMatchesIntegralOfObjective) {
  const StrategySolution s = solve_log(reference_market(), reference_risk());
  const SimConfig cfg{1.0, 1.0, 64, 100000, 5};
  const MCEstimate gap = log_wealth_identity_gap(s.market, s.risk, fractional_control(s, 64), cfg);
  EXPECT_LT(std::abs(gap.mean), 3 * gap.std_error);
  const PathSet p = simulate_fractional(fractional_control(s, 64), cfg, s.market, s.risk);
  const MCEstimate j = estimate_expected_utility(p, LogUtility{});
  EXPECT_NEAR(j.mean, frozen::log_f, 3 * j.std_error);
}

// ---------------------------------------------------------------- oracle

TEST(Oracle, UncorrelatedSingleAssetFindsMertonRatio) {
  RiskParams k = reference_risk();
  k.rho = 0.0;
  OracleOptions o;
  o.kappa_lo = o.kappa_hi = 0.0;
  o.refinements = 0;
  const OracleResult r = grid_oracle_log(reference_market(), k, o);
  EXPECT_NEAR(r.pi, 1.5, 1e-3);
  EXPECT_EQ(r.kappa, 0.0);
}

TEST(Oracle, AgreesWithClosedForm) {
  const StrategySolution s = solve_log(reference_market(), reference_risk());
  const OracleResult r = grid_oracle_log(reference_market(), reference_risk());
  EXPECT_EQ(r.refinement_depth, 2);
  EXPECT_NEAR(r.spacing, 1e-5, 1e-18);
  EXPECT_LE(std::abs(r.pi - s.pi[0]), 1e-5);
  EXPECT_LE(std::abs(r.kappa - s.kappa[0]), 1e-5);
  EXPECT_FALSE(r.on_boundary);
  const double f_star = log_objective(s.pi[0], s.kappa[0], s.market.point(0), s.risk);
  EXPECT_GE(r.value, f_star - 1e-8);
  EXPECT_LE(r.value, f_star);
  // The coarse pass alone lands within 2e-3.
  OracleOptions coarse;
  coarse.refinements = 0;
  const OracleResult c = grid_oracle_log(reference_market(), reference_risk(), coarse);
  EXPECT_LE(std::abs(c.pi - s.pi[0]), 2e-3);
  EXPECT_LE(std::abs(c.kappa - s.kappa[0]), 2e-3);
}

TEST(Oracle, ArgmaxBeatsItsNeighbours) {
  const OracleResult r = grid_oracle_log(reference_market(), reference_risk());
  const MarketPoint m = reference_market().point(0);
  for (int i = -1; i <= 1; ++i)
    for (int j = -1; j <= 1; ++j)
      EXPECT_GE(r.value, log_objective(r.pi + i * r.spacing, r.kappa + j * r.spacing, m, reference_risk()));
}

TEST(Oracle, ThreadCountDoesNotChangeResult) {
  OracleOptions a, b;
  a.spacing = b.spacing = 1e-2;
  b.threads = 4;
  const OracleResult ra = grid_oracle_log(reference_market(), reference_risk(), a);
  const OracleResult rb = grid_oracle_log(reference_market(), reference_risk(), b);
  EXPECT_EQ(ra.pi, rb.pi);
  EXPECT_EQ(ra.kappa, rb.kappa);
  EXPECT_EQ(ra.value, rb.value);
}

TEST(Oracle, BoundaryArgmaxIsFlagged) {
  OracleOptions o;
  o.pi_hi = 1.0;
  o.spacing = 1e-2;
  EXPECT_TRUE(grid_oracle_log(reference_market(), reference_risk(), o).on_boundary);
}

TEST(Oracle, EmptyRangeIsRejected) {
  OracleOptions o;
  o.pi_lo = 2.0;
  o.pi_hi = 1.0;
  EXPECT_THROW(grid_oracle_log(reference_market(), reference_risk(), o), std::invalid_argument);
  OracleOptions idx;
  idx.grid_index = 3;
  EXPECT_THROW(grid_oracle_log(reference_market(), reference_risk(), idx), std::invalid_argument);
}

// ---------------------------------------------------------------- dominance

TEST(Dominance, SelfComparisonIsExactlyZero) {
  const StrategySolution s = solve_log(reference_market(), reference_risk());
  const SimConfig cfg{1.0, 1.0, 32, 2000, 9};
  const DominanceReport r = dominance_test(s, {{"self", 1.0, 1.0, std::nullopt}}, cfg);
  EXPECT_EQ(r.entries[0].delta.mean, 0.0);
  EXPECT_EQ(r.entries[0].delta.std_error, 0.0);
  EXPECT_TRUE(r.pass);
}

TEST(Dominance, LogGainsMatchClosedForm) {
  const StrategySolution s = solve_log(reference_market(), reference_risk());
  const SimConfig cfg{1.0, 1.0, 64, 100000, 13};
  const DominanceReport r = dominance_test(
      s, {{"zero", 0.0, 0.0, std::nullopt}, {"investment_x1.1", 1.1, 1.0, std::nullopt}}, cfg);
  ASSERT_TRUE(r.pass);
  const double f_star = log_objective(s.pi[0], s.kappa[0], s.market.point(0), s.risk);
  EXPECT_NEAR(r.entries[0].delta.mean, f_star - 0.02, 3 * r.entries[0].delta.std_error);
  const double bump = 0.5 * 0.04 * std::pow(0.1 * s.pi[0], 2);
  EXPECT_NEAR(r.entries[1].delta.mean, bump, 3 * r.entries[1].delta.std_error + 1e-12);
}

TEST(Dominance, PairingShrinksTheStandardError) {
  const StrategySolution s = solve_log(reference_market(), reference_risk());
  const SimConfig cfg{1.0, 1.0, 32, 20000, 17};
  const DominanceReport paired = dominance_test(s, {{"half", 0.5, 0.5, std::nullopt}}, cfg);
  SimConfig other = cfg;
  other.seed = 18;
  const PanelResult a = simulate_panel(s, {}, cfg);
  const PanelResult b = simulate_panel(s, {{"half", 0.5, 0.5, std::nullopt}}, other);
  std::vector<double> diff(cfg.n_paths);
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = std::log(a.terminal[0][i]) - std::log(b.terminal[1][i]);
  EXPECT_LT(paired.entries[0].delta.std_error, make_estimate(diff).std_error);
}

TEST(Dominance, EveryUtilityOnASmallPanel) {
  const SimConfig cfg{1.0, 1.0, 32, 20000, 23};
  for (const UtilitySpec& u : std::vector<UtilitySpec>{LogUtility{}, PowerUtility{0.5}, PowerNegativeUtility{-1.0, 0.0},
                                                      ExponentialUtility{1.0}, QuadraticUtility{0.5}}) {
    const StrategySolution s = solve(reference_market(), reference_risk(), u, 1.0);
    const DominanceReport r = dominance_test(s, default_challengers(), cfg);
    EXPECT_TRUE(r.pass) << utility_name(u);
    EXPECT_EQ(r.entries.size(), 4u);
  }
}

TEST(Dominance, ConstantChallengers) {
  const StrategySolution s = solve_exponential(reference_market(), reference_risk(), 1.0);
  const SimConfig cfg{1.0, 1.0, 16, 5000, 1};
  const DominanceReport r = dominance_test(s, {{"fixed", 1.0, 1.0, std::make_pair(0.5, 0.1)}}, cfg);
  EXPECT_TRUE(r.pass);
  EXPECT_GT(r.entries[0].delta.mean, 0.0);
}

// ---------------------------------------------------------------- constancy

TEST(Constancy, LogOptimalEntryIsExactlyOne) {
  const StrategySolution s = solve_log(reference_market(), reference_risk());
  const SimConfig cfg{1.0, 1.0, 32, 20000, 29};
  const ConstancyReport r = constancy_check(s, constancy_panel(), cfg);
  EXPECT_EQ(r.entries[0].value.mean, 1.0);
  EXPECT_EQ(r.entries[0].value.std_error, 0.0);
  EXPECT_EQ(r.entries.size(), 6u);
  EXPECT_TRUE(r.pass) << r.max_pairwise_z;
}

TEST(Constancy, LogIsInvariantToInitialWealth) {
  const StrategySolution s = solve_log(reference_market(), reference_risk());
  const SimConfig a{1.0, 1.0, 16, 2000, 3};
  const SimConfig b{2.0, 1.0, 16, 2000, 3};
  const ConstancyReport ra = constancy_check(s, constancy_panel(), a);
  const ConstancyReport rb = constancy_check(s, constancy_panel(), b);
  for (std::size_t i = 0; i < ra.entries.size(); ++i)
    EXPECT_NEAR(ra.entries[i].value.mean, rb.entries[i].value.mean, 1e-13);
}

TEST(Constancy, SuboptimalReferenceIsDetected) {
  // Treat the zero control as if it were optimal: E[X^u / X^0] is not constant.
  StrategySolution s = solve_log(reference_market(), reference_risk());
  s.pi[0] = 0.0;
  s.kappa[0] = 0.0;
  const SimConfig cfg{1.0, 1.0, 16, 20000, 3};
  const ConstancyReport r = constancy_check(s, {{"double", 2.0, 2.0, std::nullopt}, {"other", 1.0, 1.0, std::make_pair(1.4, 0.7)}}, cfg);
  EXPECT_FALSE(r.pass);
}

// ---------------------------------------------------------------- convergence

TEST(Convergence, ExactSchemeAgainstItselfIsZero) {
  const SimConfig cfg{1.0, 1.0, 64, 200, 4};
  const RiskParams k = reference_risk();
  const StepCoefficients c16 = StepCoefficients::sample(reference_market(), 16);
  const StepCoefficients c32 = StepCoefficients::sample(reference_market(), 32);
  const StepCoefficients c64 = StepCoefficients::sample(reference_market(), 64);
  const StepCoefficients* cs[] = {&c16, &c32, &c64};
  const ConvergenceTable t = convergence_study({16, 32, 64}, cfg, k.lambda, 1, [&](const PathNoise& n, std::size_t r) {
    const auto u = FractionalControl::constant(1.0, 1.0, n.steps());
    return std::abs(fractional_path(u, n, *cs[r], k, 1.0) - fractional_path(u, n, *cs[r], k, 1.0));
  });
  for (const auto& rung : t.rungs) EXPECT_EQ(rung.error.mean, 0.0);
}

TEST(Convergence, RisklessEulerGap) {
  const SimConfig cfg{1.0, 1.0, 1024, 4, 4};
  const std::vector<std::size_t> ladder{64, 128, 256, 512, 1024};
  const ConvergenceTable t = euler_vs_exact_study(reference_market(), reference_risk(), 0.0, 0.0, cfg, ladder);
  for (const auto& rung : t.rungs) {
    const double n = double(rung.n_steps);
    EXPECT_NEAR(rung.error.mean, std::abs(std::exp(0.02) - std::pow(1 + 0.02 / n, n)), 1e-13);
    EXPECT_NEAR(rung.error.mean, std::exp(0.02) * 0.02 * 0.02 * rung.dt / 2, 0.01 * rung.error.mean);
  }
}

TEST(Convergence, EulerStrongOrderIsOneHalf) {
  const StrategySolution s = solve_log(reference_market(), reference_risk());
  const SimConfig cfg{1.0, 1.0, 1024, 4000, 8};
  const ConvergenceTable t =
      euler_vs_exact_study(s.market, s.risk, s.pi[0], s.kappa[0], cfg, {64, 128, 256, 512, 1024});
  EXPECT_TRUE(t.monotone_decreasing());
  for (std::size_t i = 1; i < t.rungs.size(); ++i) {
    EXPECT_GT(t.rungs[i].order, 0.35);
    EXPECT_LT(t.rungs[i].order, 0.65);
  }
}

TEST(Convergence, QuadraticIdentityErrorDecreases) {
  const StrategySolution s = solve_quadratic(reference_market(), reference_risk(), 0.5, 1.0);
  const SimConfig cfg{1.0, 1.0, 512, 4000, 8};
  const ConvergenceTable t = quadratic_identity_study(s, cfg, {64, 128, 256, 512});
  EXPECT_TRUE(t.monotone_decreasing());
  for (std::size_t i = 1; i < t.rungs.size(); ++i) {
    EXPECT_GE(t.rungs[i].order, 0.4);
    EXPECT_LE(t.rungs[i].order, 1.5);
  }
}

TEST(Convergence, LadderValidation) {
  const SimConfig cfg{1.0, 1.0, 64, 1, 0};
  auto zero = [](const PathNoise&, std::size_t) { return 0.0; };
  EXPECT_THROW(convergence_study({16, 64}, cfg, 0.2, 1, zero), std::invalid_argument);
  EXPECT_THROW(convergence_study({16, 24, 64}, cfg, 0.2, 1, zero), std::invalid_argument);
}
