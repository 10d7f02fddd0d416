#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "insurer/utility.hpp"
#include "test_support.hpp"

using namespace insurer;

namespace {

std::vector<UtilitySpec> all_kinds() {
  return {LogUtility{}, PowerUtility{0.5}, PowerNegativeUtility{-2.0, 3.0}, ExponentialUtility{1.5},
          QuadraticUtility{0.4}};
}

}  // namespace

TEST(Utility, Values) {
  EXPECT_EQ(utility(LogUtility{}, 1.0), 0.0);
  EXPECT_DOUBLE_EQ(utility(PowerUtility{0.5}, 4.0), 2.0);
  EXPECT_DOUBLE_EQ(utility(PowerNegativeUtility{-1.0, 3.0}, 2.0), 2.5);
  EXPECT_DOUBLE_EQ(utility(ExponentialUtility{2.0}, 0.0), -0.5);
  EXPECT_DOUBLE_EQ(utility(QuadraticUtility{0.5}, 2.0), 1.0);  // bliss value 1/(2 alpha)
}

TEST(Utility, MarginalMatchesCentralDifference) {
  insurer::testing::ParamSampler rng(3);
  for (const UtilitySpec& u : all_kinds()) {
    for (int i = 0; i < 100; ++i) {
      const double x = rng.uniform(0.1, 2.4);
      const double h = 1e-6 * std::max(1.0, x);
      const double fd = (utility(u, x + h) - utility(u, x - h)) / (2 * h);
      const double exact = marginal_utility(u, x);
      EXPECT_NEAR(fd, exact, 1e-6 * std::max(1.0, std::abs(exact))) << utility_name(u) << " x=" << x;
    }
  }
}

TEST(Utility, IncreasingWhereMarginalIsPositive) {
  for (const UtilitySpec& u : all_kinds()) {
    for (double x = 0.1; x < 2.4; x += 0.1) {
      if (marginal_utility(u, x) <= 0.0) continue;
      const double h = 1e-4 * x;
      EXPECT_GT(utility(u, x + h), utility(u, x)) << utility_name(u);
    }
  }
}

TEST(Utility, QuadraticMarginalChangesSignAtBliss) {
  const QuadraticUtility q{0.5};
  EXPECT_GT(marginal_utility(q, 1.9), 0.0);
  EXPECT_EQ(marginal_utility(q, 2.0), 0.0);
  EXPECT_LT(marginal_utility(q, 2.1), 0.0);
}

TEST(Utility, Domains) {
  EXPECT_FALSE(in_domain(LogUtility{}, 0.0));
  EXPECT_FALSE(in_domain(PowerUtility{0.5}, -1.0));
  EXPECT_TRUE(in_domain(ExponentialUtility{1.0}, -5.0));
  EXPECT_TRUE(in_domain(QuadraticUtility{1.0}, -5.0));
  EXPECT_THROW(utility(LogUtility{}, -1.0), DomainError);
}

TEST(Utility, LogMarginalTimesWealthIsExactlyOne) {
  insurer::testing::ParamSampler rng(5);
  for (int i = 0; i < 1000; ++i) {
    const double x = rng.uniform(1e-3, 1e3);
    EXPECT_EQ(marginal_utility_times(LogUtility{}, x, x), 1.0);
  }
}

TEST(Utility, PowerFactorySelectsBranch) {
  EXPECT_TRUE(std::holds_alternative<PowerUtility>(make_power_utility(0.3)));
  EXPECT_TRUE(std::holds_alternative<PowerNegativeUtility>(make_power_utility(-0.3, 1.0)));
  EXPECT_THROW(make_power_utility(0.0), std::invalid_argument);
  EXPECT_THROW(make_power_utility(1.0), std::invalid_argument);
}

TEST(Utility, ParameterChecks) {
  EXPECT_THROW(check_utility(PowerUtility{1.2}), std::invalid_argument);
  EXPECT_THROW(check_utility(PowerNegativeUtility{0.5, 0.0}), std::invalid_argument);
  EXPECT_THROW(check_utility(ExponentialUtility{0.0}), std::invalid_argument);
  EXPECT_THROW(check_utility(QuadraticUtility{-1.0}), std::invalid_argument);
  EXPECT_NO_THROW(check_utility(LogUtility{}));
}

TEST(Utility, ControlParametrisation) {
  EXPECT_TRUE(uses_fractional_controls(LogUtility{}));
  EXPECT_TRUE(uses_fractional_controls(PowerNegativeUtility{-1.0, 0.0}));
  EXPECT_FALSE(uses_fractional_controls(ExponentialUtility{1.0}));
  EXPECT_FALSE(uses_fractional_controls(QuadraticUtility{1.0}));
}
