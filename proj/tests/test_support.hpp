#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "insurer/model.hpp"
#include "insurer/utility.hpp"

namespace insurer::testing {

// r=0.02, mu=0.08, sigma=0.2, p=0.2, a=0.1, b=0.15, gamma=0.3, lambda=0.2, rho=-0.2
inline MarketCoefficients reference_market(double T = 1.0, std::size_t n_grid = 1) {
  return MarketCoefficients::constant(0.02, 0.08, 0.2, T, n_grid);
}

inline RiskParams reference_risk() { return {0.2, 0.1, 0.15, 0.3, 0.2, -0.2}; }

// Frozen by tests/oracles/freeze_values.py (mpmath, 40 digits).
namespace frozen {
inline constexpr double f_half_half = 0.058183714100445018;
inline constexpr double margin = 0.031;
inline constexpr double log_pi = 1.3952063412846603;
inline constexpr double log_kappa = 0.69862439143559851;
inline constexpr double log_f = 0.076263581002018674;
inline constexpr double power_phi = 0.60860843403503151;  // alpha = 0.5
inline constexpr double power_kappa = 1.3046385532165616;
inline constexpr double power_pi = 2.8043042170175156;
inline constexpr double exp_L = 0.72760878137674723;  // alpha = 1, T = 1, t = 0
inline constexpr double exp_pi_tilde = 1.3611566927536209;
inline constexpr double exp_theta1 = -0.29999999999999999;
inline constexpr double exp_theta2 = 0.10909646964091808;
inline constexpr double exp_theta3 = 0.24943598330738143;
inline constexpr double quad_Z0_example = 0.4432792448426417;  // (1 - 0.5 e^0.02) e^-0.1
}  // namespace frozen

struct ParamSet {
  MarketCoefficients market;
  RiskParams risk;
};

/// Random parameter sets that pass validation and satisfy the technical
/// condition with margin in [0.005, 0.2].
class ParamSampler {
 public:
  explicit ParamSampler(std::uint64_t seed) : rng_(seed) {}

  double uniform(double lo, double hi) {
    const double u = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
    return lo + (hi - lo) * u;
  }

  ParamSet next(double T = 1.0) {
    const double r = uniform(0.0, 0.05);
    const double mu = r + uniform(0.01, 0.1);
    const double sigma = uniform(0.15, 0.4);
    RiskParams k{};
    k.a = uniform(0.05, 0.2);
    k.b = uniform(0.05, 0.3);
    k.gamma = uniform(0.1, 0.5);
    k.lambda = uniform(0.05, 1.0);
    k.rho = uniform(-0.9, -0.01);
    const double sharpe = (mu - r) / sigma;
    k.p = k.a + k.lambda * k.gamma - k.rho * k.b * sharpe + uniform(0.005, 0.2);
    return {MarketCoefficients::constant(r, mu, sigma, T), k};
  }

  UtilitySpec power_utility() {
    return uniform(0.0, 1.0) < 0.5 ? make_power_utility(uniform(0.05, 0.95))
                                   : make_power_utility(uniform(-5.0, -0.1));
  }

  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

}  // namespace insurer::testing
