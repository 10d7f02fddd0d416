#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "insurer/errors.hpp"
#include "insurer/grid.hpp"
#include "insurer/model.hpp"
#include "insurer/roots.hpp"
#include "insurer/utility.hpp"

namespace insurer {

struct SolveOptions {
  /// Replace the optimal debt ratio (or liability) by zero where the technical
  /// condition fails instead of throwing; the result is flagged non-optimal.
  bool clamp_zero = false;
  double root_tol = 1e-12;
  double residual_tol = 1e-10;
  int max_iterations = 200;
};

// ---------------------------------------------------------------------------
// Logarithmic utility: A kappa^2 - B kappa + C = 0
// ---------------------------------------------------------------------------

struct LogQuadratic {
  double A = 0.0;
  std::vector<double> B;
  std::vector<double> C;
  std::vector<double> Delta;
};

inline LogQuadratic log_quadratic(const MarketCoefficients& market, const RiskParams& k) {
  LogQuadratic q;
  const double s = k.b * k.b * (1.0 - k.rho * k.rho);
  q.A = s * k.gamma;
  for (std::size_t j = 0; j < market.grid_size(); ++j) {
    const double drift = k.liability_drift(market.point(j));
    const double B = s + k.gamma * drift;
    const double C = drift - k.lambda * k.gamma;
    q.B.push_back(B);
    q.C.push_back(C);
    q.Delta.push_back(B * B - 4.0 * q.A * C);
  }
  return q;
}

/// The discriminant written as a sum of squares; positive whenever |rho| < 1.
inline double log_discriminant_sum_of_squares(double C, const RiskParams& k) {
  const double s = k.b * k.b * (1.0 - k.rho * k.rho);
  const double d = s - k.gamma * (C + k.lambda * k.gamma);
  return d * d + 4.0 * k.lambda * s * k.gamma * k.gamma;
}

/// Smaller root in rationalized form 2C/(B + sqrt(Delta)); reduces to C/B when A = 0.
inline double log_kappa_minus(double B, double C, double Delta) {
  return 2.0 * C / (B + std::sqrt(Delta));
}

inline double log_kappa_plus(double A, double B, double Delta) {
  return (B + std::sqrt(Delta)) / (2.0 * A);
}

/// First-order residuals of f at (pi, kappa): (d f/d pi, d f/d kappa).
inline std::pair<double, double> log_foc_residual(double pi, double kappa, const MarketPoint& m,
                                                  const RiskParams& k) {
  const double slack = 1.0 - k.gamma * kappa;
  if (!(slack > 0.0)) throw DomainError("verify_foc_log: kappa >= 1/gamma");
  return {m.excess_return() - m.sigma * m.sigma * pi + k.rho * k.b * m.sigma * kappa,
          (k.p - k.a) + k.rho * k.b * m.sigma * pi - k.b * k.b * kappa -
              k.lambda * k.gamma / slack};
}

inline std::vector<std::pair<double, double>> verify_foc_log(const std::vector<double>& pi,
                                                             const std::vector<double>& kappa,
                                                             const MarketCoefficients& market,
                                                             const RiskParams& risk) {
  if (pi.size() != market.grid_size() || kappa.size() != market.grid_size())
    throw std::invalid_argument("verify_foc_log: control grid does not match market grid");
  std::vector<std::pair<double, double>> out;
  out.reserve(pi.size());
  for (std::size_t j = 0; j < pi.size(); ++j)
    out.push_back(log_foc_residual(pi[j], kappa[j], market.point(j), risk));
  return out;
}

// ---------------------------------------------------------------------------
// Power utility: phi^(alpha-1) + B1 phi + C1 = 0 on (0, 1)
// ---------------------------------------------------------------------------

struct PowerRootFunction {
  double alpha;
  double B1;
  double C1;

  double operator()(double phi) const { return std::pow(phi, alpha - 1.0) + B1 * phi + C1; }
};

inline PowerRootFunction power_root_function(const MarketPoint& m, const RiskParams& k,
                                             double alpha) {
  const double s = (alpha - 1.0) * k.b * k.b * (1.0 - k.rho * k.rho);
  return {alpha, s / (k.lambda * k.gamma * k.gamma),
          -(k.liability_drift(m) + s / k.gamma) / (k.lambda * k.gamma)};
}

/// Residual of the debt-ratio equation written in kappa.
inline double power_kappa_residual(double kappa, const MarketPoint& m, const RiskParams& k,
                                   double alpha) {
  return k.liability_drift(m) + (alpha - 1.0) * k.b * k.b * (1.0 - k.rho * k.rho) * kappa -
         k.lambda * k.gamma * std::pow(1.0 - k.gamma * kappa, alpha - 1.0);
}

struct PowerPoint {
  double phi;
  double kappa;
  double pi;
  double residual;
  int iterations;
};

inline double power_merton_ratio(const MarketPoint& m, double alpha) {
  return m.excess_return() / ((1.0 - alpha) * m.sigma * m.sigma);
}

/// Solves the power-utility debt-ratio equation at one coefficient point.
/// Requires the technical condition (h(1) < 0) at that point.
inline PowerPoint power_control_at(const MarketPoint& m, const RiskParams& k, double alpha,
                                   const SolveOptions& opts = {}) {
  const PowerRootFunction h = power_root_function(m, k, alpha);
  constexpr double eps = 1e-6;
  double lo = eps;
  double hi = 1.0 - eps;
  while (!(h(lo) > 0.0)) {
    lo /= 16.0;
    if (lo < 1e-300) throw BracketFailure("solve_power: h has no positive value near 0");
  }
  while (!(h(hi) < 0.0)) {
    if (hi == 1.0) throw BracketFailure("solve_power: h(1) >= 0");
    hi = std::min(1.0, 1.0 - (1.0 - hi) / 16.0);
  }
  const double f_tol = 1e-3 * opts.residual_tol / (k.lambda * k.gamma);
  const RootResult root = bisect(h, lo, hi, opts.root_tol, f_tol, opts.max_iterations);
  const double phi = root.root;
  const double kappa = (1.0 - phi) / k.gamma;
  return {phi, kappa, power_merton_ratio(m, alpha) + k.rho * k.b * kappa / m.sigma,
          power_kappa_residual(kappa, m, k, alpha), root.iterations};
}

// ---------------------------------------------------------------------------
// Exponential utility: lambda gamma e^(A3 L) + B3 L - C3 = 0
// ---------------------------------------------------------------------------

struct ExponentialRootFunction {
  double lambda_gamma;
  double A3;
  double B3;
  double C3;

  double operator()(double L) const { return lambda_gamma * std::exp(A3 * L) + B3 * L - C3; }
};

/// `growth` is exp(int_t^T r ds).
inline ExponentialRootFunction exponential_root_function(const MarketPoint& m, const RiskParams& k,
                                                         double alpha, double growth) {
  return {k.lambda * k.gamma, alpha * k.gamma * growth,
          alpha * growth * k.b * k.b * (1.0 - k.rho * k.rho), k.liability_drift(m)};
}

struct DollarPoint {
  double pi_tilde;
  double L;
};

struct ExponentialPoint {
  double pi_tilde;
  double L;
  double residual;
  int iterations;
};

inline double exponential_investment(const MarketPoint& m, const RiskParams& k, double alpha,
                                     double growth, double L) {
  return m.excess_return() / (growth * alpha * m.sigma * m.sigma) + k.rho * k.b * L / m.sigma;
}

/// Root of the liability equation; zero when h(0) = 0. Throws
/// TechnicalConditionViolated when h(0) > 0.
inline RootResult exponential_liability_root(const ExponentialRootFunction& h,
                                             const SolveOptions& opts = {}) {
  const double h0 = h(0.0);
  if (h0 == 0.0) return {0.0, 0.0, 0};
  if (h0 > 0.0)
    throw TechnicalConditionViolated("solve_exponential: h(0) > 0", {}, {h.C3 - h.lambda_gamma});
  double hi = 1.0;
  int doublings = 0;
  while (!(h(hi) > 0.0)) {
    hi *= 2.0;
    if (++doublings > 200) throw BracketFailure("solve_exponential: bracket growth failed");
  }
  return bisect(h, 0.0, hi, opts.root_tol, 1e-3 * opts.residual_tol, opts.max_iterations);
}

inline ExponentialPoint exponential_control_at(const MarketCoefficients& market,
                                               const RiskParams& k, double alpha, double t,
                                               const SolveOptions& opts = {}) {
  const MarketPoint m = market.at(t);
  const double growth = market.growth_to_horizon(t);
  const ExponentialRootFunction h = exponential_root_function(m, k, alpha, growth);
  if (opts.clamp_zero && !(h(0.0) < 0.0))
    return {exponential_investment(m, k, alpha, growth, 0.0), 0.0, h(0.0), 0};
  const RootResult root = exponential_liability_root(h, opts);
  return {exponential_investment(m, k, alpha, growth, root.root), root.root, h(root.root),
          root.iterations};
}

// ---------------------------------------------------------------------------
// Quadratic utility: feedback laws in the density process Z
// ---------------------------------------------------------------------------

/// Deterministic ingredients of the quadratic-utility feedback rule.
struct QuadraticIngredients {
  double alpha = 0.0;
  double x0 = 0.0;
  GridFunction Phi;
  GridFunction varphi;
  GridFunction xi;
  double Z0 = 0.0;

  double P(double t) const { return std::exp(xi.integral(0.0, t)); }
  double P_T() const { return P(xi.horizon()); }
  /// P(t) / P(T) = exp(-int_t^T xi ds)
  double feedback_factor(double t) const { return std::exp(-xi.integral(t, xi.horizon())); }
};

inline QuadraticIngredients quadratic_ingredients(const MarketCoefficients& market,
                                                  const RiskParams& k, double alpha, double x0,
                                                  bool clamp_zero = false) {
  if (!(alpha > 0.0)) throw std::invalid_argument("quadratic utility requires alpha > 0");
  if (!(x0 > 0.0)) throw std::invalid_argument("initial wealth must be positive");
  const double denom = k.b * k.b * (1.0 - k.rho * k.rho) + k.lambda * k.gamma * k.gamma;
  std::vector<double> Phi, varphi, xi;
  std::vector<std::size_t> negative;
  for (std::size_t j = 0; j < market.grid_size(); ++j) {
    const MarketPoint m = market.point(j);
    double numer = k.liability_drift(m) - k.lambda * k.gamma;
    if (numer < 0.0) {
      negative.push_back(j);
      if (clamp_zero) numer = 0.0;
    }
    Phi.push_back(numer / denom);
    varphi.push_back(numer * numer / denom);
    xi.push_back(-m.sharpe() * m.sharpe() - varphi.back());
  }
  if (!negative.empty() && !clamp_zero)
    throw PhiNegative("solve_quadratic: Phi(t) < 0 at " + std::to_string(negative.size()) +
                          " grid point(s), first at t=" +
                          std::to_string(market.time_of(negative.front())),
                      negative);
  const double bliss = alpha * x0 * market.growth_to_horizon(0.0);
  if (!(bliss < 1.0))
    throw BlissPointExceeded("solve_quadratic: alpha*x0*exp(int r) = " + std::to_string(bliss) +
                             " >= 1");
  const double T = market.horizon();
  QuadraticIngredients q{alpha, x0, GridFunction(std::move(Phi), T),
                         GridFunction(std::move(varphi), T), GridFunction(std::move(xi), T), 0.0};
  q.Z0 = (1.0 - bliss) * q.P_T();
  return q;
}

/// (t, Z_{t-}) -> (pi_tilde*, L*).
class QuadraticFeedback {
 public:
  QuadraticFeedback(QuadraticIngredients q, MarketCoefficients market, RiskParams risk)
      : q_(std::move(q)), market_(std::move(market)), risk_(risk) {}

  /// Controls per unit of Z_{t-}.
  DollarPoint per_unit(double t) const {
    const MarketPoint m = market_.at(t);
    const double Phi = q_.Phi.at(t);
    const double scale = q_.feedback_factor(t) / (q_.alpha * market_.growth_to_horizon(t));
    return {scale * (m.excess_return() / (m.sigma * m.sigma) + risk_.rho * risk_.b * Phi / m.sigma),
            scale * Phi};
  }

  DollarPoint operator()(double t, double z) const {
    const DollarPoint u = per_unit(t);
    return {u.pi_tilde * z, u.L * z};
  }

  const QuadraticIngredients& ingredients() const noexcept { return q_; }

 private:
  QuadraticIngredients q_;
  MarketCoefficients market_;
  RiskParams risk_;
};

// ---------------------------------------------------------------------------
// Strategy solution
// ---------------------------------------------------------------------------

enum class ControlKind { fractional, dollar, feedback };

struct StrategySolution {
  UtilitySpec utility;
  ControlKind kind = ControlKind::fractional;
  MarketCoefficients market;
  RiskParams risk{};
  ConditionMargin margin;

  /// Grid segment start times; all per-point vectors below are indexed alike.
  std::vector<double> times;
  std::vector<double> pi;
  std::vector<double> kappa;
  /// Power utility only: phi = 1 - gamma kappa.
  std::vector<double> phi;
  /// Exponential: dollar controls. Quadratic: controls per unit Z_{t-}.
  std::vector<double> pi_tilde;
  std::vector<double> L;

  std::vector<double> foc_residual;
  std::vector<int> iterations;
  bool non_optimal = false;
  std::vector<std::size_t> clamped_points;
  std::optional<QuadraticIngredients> quadratic;
  SolveOptions options;

  double foc_residual_max() const {
    double m = 0.0;
    for (std::size_t j = 0; j < foc_residual.size(); ++j) {
      if (std::find(clamped_points.begin(), clamped_points.end(), j) != clamped_points.end())
        continue;
      m = std::max(m, std::abs(foc_residual[j]));
    }
    return m;
  }

  int total_iterations() const {
    int n = 0;
    for (int i : iterations) n += i;
    return n;
  }

  bool is_clamped(std::size_t j) const {
    return std::find(clamped_points.begin(), clamped_points.end(), j) != clamped_points.end();
  }

  QuadraticFeedback feedback() const {
    if (!quadratic) throw std::logic_error("feedback(): not a quadratic-utility solution");
    return {*quadratic, market, risk};
  }
};

namespace detail {

inline void check_inputs(const MarketCoefficients& market, const RiskParams& risk) {
  const ValidationReport report = validate_params(market, risk);
  if (!report.ok()) {
    std::string msg = "invalid parameters:";
    for (const auto& v : report.violations) msg += " " + v + ";";
    throw std::invalid_argument(msg);
  }
}

inline void enforce_condition(const ConditionMargin& margin, const MarketCoefficients& market,
                              const SolveOptions& opts, const char* who) {
  if (margin.holds() || opts.clamp_zero) return;
  std::vector<std::size_t> pts = margin.failing_points();
  std::vector<double> vals;
  for (auto j : pts) vals.push_back(margin.margin[j]);
  throw TechnicalConditionViolated(std::string(who) +
                                       ": technical condition fails, min C(t) = " +
                                       std::to_string(margin.min) +
                                       " at t = " + std::to_string(market.time_of(margin.argmin)),
                                   std::move(pts), std::move(vals));
}

inline StrategySolution base_solution(const UtilitySpec& u, ControlKind kind,
                                      const MarketCoefficients& market, const RiskParams& risk,
                                      const SolveOptions& opts) {
  StrategySolution s;
  s.utility = u;
  s.kind = kind;
  s.market = market;
  s.risk = risk;
  s.margin = technical_condition_margin(market, risk);
  s.options = opts;
  for (std::size_t j = 0; j < market.grid_size(); ++j) s.times.push_back(market.time_of(j));
  return s;
}

}  // namespace detail

inline StrategySolution solve_log(const MarketCoefficients& market, const RiskParams& risk,
                                  const SolveOptions& opts = {}) {
  detail::check_inputs(market, risk);
  StrategySolution s = detail::base_solution(LogUtility{}, ControlKind::fractional, market, risk, opts);
  detail::enforce_condition(s.margin, market, opts, "solve_log");
  const LogQuadratic q = log_quadratic(market, risk);
  for (std::size_t j = 0; j < market.grid_size(); ++j) {
    const MarketPoint m = market.point(j);
    double kappa = 0.0;
    if (q.C[j] > 0.0) {
      kappa = log_kappa_minus(q.B[j], q.C[j], q.Delta[j]);
    } else {
      s.clamped_points.push_back(j);
      s.non_optimal = true;
    }
    const double pi = (m.excess_return() + risk.rho * risk.b * m.sigma * kappa) / (m.sigma * m.sigma);
    const auto [r1, r2] = log_foc_residual(pi, kappa, m, risk);
    s.pi.push_back(pi);
    s.kappa.push_back(kappa);
    s.foc_residual.push_back(std::max(std::abs(r1), std::abs(r2)));
    s.iterations.push_back(0);
  }
  return s;
}

inline StrategySolution solve_power(const MarketCoefficients& market, const RiskParams& risk,
                                    double alpha, double c = 0.0, const SolveOptions& opts = {}) {
  detail::check_inputs(market, risk);
  const UtilitySpec u = make_power_utility(alpha, c);
  StrategySolution s = detail::base_solution(u, ControlKind::fractional, market, risk, opts);
  detail::enforce_condition(s.margin, market, opts, "solve_power");
  for (std::size_t j = 0; j < market.grid_size(); ++j) {
    const MarketPoint m = market.point(j);
    if (s.margin.margin[j] > 0.0) {
      const PowerPoint pt = power_control_at(m, risk, alpha, opts);
      s.phi.push_back(pt.phi);
      s.kappa.push_back(pt.kappa);
      s.pi.push_back(pt.pi);
      s.foc_residual.push_back(std::abs(pt.residual));
      s.iterations.push_back(pt.iterations);
    } else {
      // Boundary limit: h(1) >= 0 pushes the root to phi = 1, i.e. kappa = 0.
      s.clamped_points.push_back(j);
      s.non_optimal = true;
      s.phi.push_back(1.0);
      s.kappa.push_back(0.0);
      s.pi.push_back(power_merton_ratio(m, alpha));
      s.foc_residual.push_back(std::abs(power_kappa_residual(0.0, m, risk, alpha)));
      s.iterations.push_back(0);
    }
  }
  return s;
}

inline StrategySolution solve_exponential(const MarketCoefficients& market, const RiskParams& risk,
                                          double alpha, const SolveOptions& opts = {}) {
  detail::check_inputs(market, risk);
  if (!(alpha > 0.0)) throw std::invalid_argument("exponential utility requires alpha > 0");
  StrategySolution s = detail::base_solution(ExponentialUtility{alpha}, ControlKind::dollar,
                                             market, risk, opts);
  detail::enforce_condition(s.margin, market, opts, "solve_exponential");
  for (std::size_t j = 0; j < market.grid_size(); ++j) {
    const ExponentialPoint pt = exponential_control_at(market, risk, alpha, s.times[j], opts);
    if (!(s.margin.margin[j] > 0.0)) {
      s.clamped_points.push_back(j);
      s.non_optimal = true;
    }
    s.pi_tilde.push_back(pt.pi_tilde);
    s.L.push_back(pt.L);
    s.foc_residual.push_back(std::abs(pt.residual));
    s.iterations.push_back(pt.iterations);
  }
  return s;
}

inline StrategySolution solve_quadratic(const MarketCoefficients& market, const RiskParams& risk,
                                        double alpha, double x0, const SolveOptions& opts = {}) {
  detail::check_inputs(market, risk);
  StrategySolution s = detail::base_solution(QuadraticUtility{alpha}, ControlKind::feedback,
                                             market, risk, opts);
  s.quadratic = quadratic_ingredients(market, risk, alpha, x0, opts.clamp_zero);
  const double denom = risk.b * risk.b * (1.0 - risk.rho * risk.rho) +
                       risk.lambda * risk.gamma * risk.gamma;
  const QuadraticFeedback rule = s.feedback();
  for (std::size_t j = 0; j < market.grid_size(); ++j) {
    const double numer = risk.liability_drift(market.point(j)) - risk.lambda * risk.gamma;
    if (numer < 0.0) {
      s.clamped_points.push_back(j);
      s.non_optimal = true;
    }
    const DollarPoint u = rule.per_unit(s.times[j]);
    s.pi_tilde.push_back(u.pi_tilde);
    s.L.push_back(u.L);
    s.foc_residual.push_back(std::abs(numer - denom * s.quadratic->Phi[j]));
    s.iterations.push_back(0);
  }
  return s;
}

/// Dispatches on the utility family. `x0` is only used by the quadratic case.
inline StrategySolution solve(const MarketCoefficients& market, const RiskParams& risk,
                              const UtilitySpec& u, double x0, const SolveOptions& opts = {}) {
  check_utility(u);
  return std::visit(
      [&](const auto& spec) -> StrategySolution {
        using T = std::decay_t<decltype(spec)>;
        if constexpr (std::is_same_v<T, LogUtility>)
          return solve_log(market, risk, opts);
        else if constexpr (std::is_same_v<T, PowerUtility>)
          return solve_power(market, risk, spec.alpha, 0.0, opts);
        else if constexpr (std::is_same_v<T, PowerNegativeUtility>)
          return solve_power(market, risk, spec.alpha, spec.c, opts);
        else if constexpr (std::is_same_v<T, ExponentialUtility>)
          return solve_exponential(market, risk, spec.alpha, opts);
        else
          return solve_quadratic(market, risk, spec.alpha, x0, opts);
      },
      u);
}

// ---------------------------------------------------------------------------
// Measure-change kernels
// ---------------------------------------------------------------------------

/// (theta1, theta2, theta3) of dZ = Z_{t-}(theta1 dW1 + theta2 dW2 + theta3 dM).
/// For quadratic utility the kernels are stored per unit Z_{t-}.
struct MeasureChangeKernel {
  std::vector<double> theta1;
  std::vector<double> theta2;
  std::vector<double> theta3;
  /// mu - r + sigma theta1
  std::vector<double> investment_residual;
  /// p - a + rho b (mu - r)/sigma - b sqrt(1-rho^2) theta2 - lambda gamma (1 + theta3)
  std::vector<double> liability_residual;
  bool per_unit_z = false;

  double max_residual() const {
    double m = 0.0;
    for (double v : investment_residual) m = std::max(m, std::abs(v));
    for (double v : liability_residual) m = std::max(m, std::abs(v));
    return m;
  }
};

inline MeasureChangeKernel compute_kernels(const StrategySolution& s, double tolerance = 1e-10) {
  MeasureChangeKernel k;
  const RiskParams& risk = s.risk;
  const double side = risk.idiosyncratic_scale();
  const double alpha = utility_alpha(s.utility);
  k.per_unit_z = s.kind == ControlKind::feedback;

  for (std::size_t j = 0; j < s.times.size(); ++j) {
    const MarketPoint m = s.market.point(j);
    double t1 = 0.0, t2 = 0.0, t3 = 0.0;
    if (std::holds_alternative<LogUtility>(s.utility)) {
      t1 = -(m.sigma * s.pi[j] - risk.rho * risk.b * s.kappa[j]);
      t2 = side * s.kappa[j];
      t3 = risk.gamma * s.kappa[j] / (1.0 - risk.gamma * s.kappa[j]);
    } else if (s.kind == ControlKind::fractional) {
      t1 = (alpha - 1.0) * (m.sigma * s.pi[j] - risk.rho * risk.b * s.kappa[j]);
      t2 = -(alpha - 1.0) * side * s.kappa[j];
      t3 = std::pow(1.0 - risk.gamma * s.kappa[j], alpha - 1.0) - 1.0;
    } else if (s.kind == ControlKind::dollar) {
      const double g = alpha * s.market.growth_to_horizon(s.times[j]);
      t1 = -g * (m.sigma * s.pi_tilde[j] - risk.rho * risk.b * s.L[j]);
      t2 = g * side * s.L[j];
      t3 = std::expm1(g * risk.gamma * s.L[j]);
    } else {
      const double Phi = s.quadratic->Phi[j];
      t1 = -m.sharpe();
      t2 = side * Phi;
      t3 = risk.gamma * Phi;
    }
    k.theta1.push_back(t1);
    k.theta2.push_back(t2);
    k.theta3.push_back(t3);
    k.investment_residual.push_back(m.excess_return() + m.sigma * t1);
    k.liability_residual.push_back(risk.liability_drift(m) - side * t2 -
                                   risk.lambda * risk.gamma * (1.0 + t3));
    if (!s.is_clamped(j) && (std::abs(k.investment_residual.back()) > tolerance ||
                             std::abs(k.liability_residual.back()) > tolerance))
      throw KernelResidualTooLarge("compute_kernels: matching residual above tolerance at t = " +
                                   std::to_string(s.times[j]));
  }
  return k;
}

}  // namespace insurer
