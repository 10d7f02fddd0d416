#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "insurer/errors.hpp"
#include "insurer/grid.hpp"

namespace insurer {

/// Coefficients (r, mu, sigma) of the riskless and risky assets at one instant.
struct MarketPoint {
  double r;
  double mu;
  double sigma;

  double excess_return() const noexcept { return mu - r; }
  /// (mu - r) / sigma
  double sharpe() const noexcept { return (mu - r) / sigma; }
};

/// r(t), mu(t), sigma(t) as piecewise-constant functions on a common grid.
class MarketCoefficients {
 public:
  MarketCoefficients() = default;

  MarketCoefficients(GridFunction r, GridFunction mu, GridFunction sigma)
      : r_(std::move(r)), mu_(std::move(mu)), sigma_(std::move(sigma)) {
    if (r_.size() != mu_.size() || r_.size() != sigma_.size())
      throw std::invalid_argument("MarketCoefficients: grids differ in size");
    if (r_.horizon() != mu_.horizon() || r_.horizon() != sigma_.horizon())
      throw std::invalid_argument("MarketCoefficients: grids differ in horizon");
  }

  static MarketCoefficients constant(double r, double mu, double sigma, double horizon,
                                     std::size_t n_grid = 1) {
    return {GridFunction::constant(r, horizon, n_grid), GridFunction::constant(mu, horizon, n_grid),
            GridFunction::constant(sigma, horizon, n_grid)};
  }

  const GridFunction& r() const noexcept { return r_; }
  const GridFunction& mu() const noexcept { return mu_; }
  const GridFunction& sigma() const noexcept { return sigma_; }

  std::size_t grid_size() const noexcept { return r_.size(); }
  double horizon() const noexcept { return r_.horizon(); }
  double time_of(std::size_t j) const noexcept { return r_.segment_start(j); }

  MarketPoint point(std::size_t j) const { return {r_[j], mu_[j], sigma_[j]}; }
  MarketPoint at(double t) const { return point(r_.index_at(t)); }

  /// exp(int_t^T r ds): growth of the riskless account from t to T.
  double growth_to_horizon(double t) const { return std::exp(r_.integral(t, horizon())); }

 private:
  GridFunction r_;
  GridFunction mu_;
  GridFunction sigma_;
};

/// Per-policy insurance risk: premium p, claim drift a, claim volatility b,
/// jump size gamma, Poisson intensity lambda and correlation rho with W1.
struct RiskParams {
  double p;
  double a;
  double b;
  double gamma;
  double lambda;
  double rho;

  double idiosyncratic_scale() const noexcept { return b * std::sqrt(1.0 - rho * rho); }

  /// p - a + rho b (mu - r)/sigma
  double liability_drift(const MarketPoint& m) const noexcept {
    return p - a + rho * b * m.sharpe();
  }
};

struct ValidationReport {
  std::vector<std::string> violations;
  std::vector<std::string> warnings;

  bool ok() const noexcept { return violations.empty(); }
};

inline ValidationReport validate_params(const MarketCoefficients& market, const RiskParams& risk) {
  ValidationReport report;
  auto fail = [&](std::string msg) { report.violations.push_back(std::move(msg)); };

  for (std::size_t j = 0; j < market.grid_size(); ++j) {
    const MarketPoint m = market.point(j);
    const std::string at = " at grid point " + std::to_string(j);
    if (!std::isfinite(m.r) || !std::isfinite(m.mu) || !std::isfinite(m.sigma)) {
      fail("non-finite coefficient" + at);
      continue;
    }
    if (!(m.sigma > 0.0)) fail("sigma>0 fails" + at);
    if (!(m.mu > m.r)) fail("mu>r fails" + at);
    if (!(m.r >= 0.0)) fail("r>=0 fails" + at);
  }

  const double values[] = {risk.p, risk.a, risk.b, risk.gamma, risk.lambda, risk.rho};
  for (double v : values) {
    if (!std::isfinite(v)) {
      fail("non-finite risk parameter");
      return report;
    }
  }
  if (!(risk.a > 0.0)) fail("a>0 fails");
  if (!(risk.p > risk.a)) fail("p>a fails");
  if (!(risk.b > 0.0)) fail("b>0 fails");
  if (!(risk.gamma > 0.0)) fail("gamma>0 fails");
  if (!(risk.lambda > 0.0)) fail("lambda>0 fails");
  if (!(risk.rho > -1.0 && risk.rho < 1.0)) fail("rho in (-1,1) fails");
  if (risk.rho >= 0.0) report.warnings.push_back("rho>=0: liabilities not negatively correlated");
  return report;
}

/// C(t) = p - a + rho b (mu - r)/sigma - lambda gamma on every grid point.
struct ConditionMargin {
  std::vector<double> margin;
  double min = std::numeric_limits<double>::infinity();
  std::size_t argmin = 0;
  double t_argmin = 0.0;

  bool holds() const noexcept { return min > 0.0; }

  std::vector<std::size_t> failing_points() const {
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < margin.size(); ++j)
      if (!(margin[j] > 0.0)) out.push_back(j);
    return out;
  }
};

inline ConditionMargin technical_condition_margin(const MarketCoefficients& market,
                                                  const RiskParams& risk) {
  ConditionMargin out;
  out.margin.reserve(market.grid_size());
  for (std::size_t j = 0; j < market.grid_size(); ++j) {
    const double c = risk.liability_drift(market.point(j)) - risk.lambda * risk.gamma;
    out.margin.push_back(c);
    if (c < out.min) {
      out.min = c;
      out.argmin = j;
      out.t_argmin = market.time_of(j);
    }
  }
  return out;
}

/// Pointwise log-utility objective f(pi, kappa); the drift of ln X.
inline double log_objective(double pi, double kappa, const MarketPoint& m, const RiskParams& k) {
  const double slack = 1.0 - k.gamma * kappa;
  if (!(slack > 0.0)) throw DomainError("log_objective: 1 - gamma*kappa <= 0");
  return m.r + m.excess_return() * pi + (k.p - k.a) * kappa - 0.5 * m.sigma * m.sigma * pi * pi +
         k.rho * k.b * m.sigma * pi * kappa - 0.5 * k.b * k.b * kappa * kappa +
         k.lambda * std::log(slack);
}

inline double log_objective(double pi, double kappa, double t, const MarketCoefficients& market,
                            const RiskParams& risk) {
  return log_objective(pi, kappa, market.at(t), risk);
}

struct Hessian2 {
  double pp;
  double pk;
  double kk;

  double det() const noexcept { return pp * kk - pk * pk; }
  bool negative_definite() const noexcept { return pp < 0.0 && kk < 0.0 && det() > 0.0; }
};

inline Hessian2 log_objective_hessian(double kappa, const MarketPoint& m, const RiskParams& k) {
  const double slack = 1.0 - k.gamma * kappa;
  if (!(slack > 0.0)) throw DomainError("log_objective_hessian: 1 - gamma*kappa <= 0");
  return {-m.sigma * m.sigma, k.rho * k.b * m.sigma,
          -k.b * k.b - k.lambda * k.gamma * k.gamma / (slack * slack)};
}

}  // namespace insurer
