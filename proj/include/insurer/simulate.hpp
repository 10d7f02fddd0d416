#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "insurer/errors.hpp"
#include "insurer/model.hpp"
#include "insurer/noise.hpp"
#include "insurer/parallel.hpp"
#include "insurer/solvers.hpp"

namespace insurer {

/// Market coefficients sampled at the left end of every simulation step.
/// Exact when the simulation grid refines the coefficient grid.
struct StepCoefficients {
  double dt = 0.0;
  std::vector<double> times;
  std::vector<MarketPoint> market;

  std::size_t steps() const noexcept { return times.size(); }

  static StepCoefficients sample(const MarketCoefficients& coeffs, std::size_t n_steps) {
    StepCoefficients out;
    out.dt = coeffs.horizon() / static_cast<double>(n_steps);
    for (std::size_t k = 0; k < n_steps; ++k) {
      const double t = coeffs.horizon() * static_cast<double>(k) / static_cast<double>(n_steps);
      out.times.push_back(t);
      out.market.push_back(coeffs.at(t));
    }
    return out;
  }
};

/// Proportions (pi, kappa) held constant over each simulation step.
struct FractionalControl {
  std::vector<double> pi;
  std::vector<double> kappa;

  static FractionalControl constant(double pi, double kappa, std::size_t n_steps) {
    return {std::vector<double>(n_steps, pi), std::vector<double>(n_steps, kappa)};
  }
};

/// Dollar amounts (pi_tilde, L) held constant over each simulation step.
struct DollarControl {
  std::vector<double> pi_tilde;
  std::vector<double> L;

  static DollarControl constant(double pi_tilde, double L, std::size_t n_steps) {
    return {std::vector<double>(n_steps, pi_tilde), std::vector<double>(n_steps, L)};
  }
};

inline void check_admissible(const FractionalControl& u, const RiskParams& risk, std::size_t n_steps) {
  if (u.pi.size() != n_steps || u.kappa.size() != n_steps)
    throw std::invalid_argument("fractional control does not match the simulation grid");
  for (std::size_t k = 0; k < n_steps; ++k) {
    if (!std::isfinite(u.pi[k]) || !(u.kappa[k] >= 0.0) || !(risk.gamma * u.kappa[k] < 1.0))
      throw AdmissibilityError("fractional control inadmissible at step " + std::to_string(k) +
                               ": need kappa in [0, 1/gamma)");
  }
}

inline void check_admissible(const DollarControl& u, std::size_t n_steps) {
  if (u.pi_tilde.size() != n_steps || u.L.size() != n_steps)
    throw std::invalid_argument("dollar control does not match the simulation grid");
  for (std::size_t k = 0; k < n_steps; ++k) {
    if (!std::isfinite(u.pi_tilde[k]) || !(u.L[k] >= 0.0))
      throw AdmissibilityError("dollar control inadmissible at step " + std::to_string(k) +
                               ": need L >= 0");
  }
}

/// Samples an optimal strategy on the simulation grid (fractional kinds only).
inline FractionalControl fractional_control(const StrategySolution& s, std::size_t n_steps) {
  if (s.kind != ControlKind::fractional)
    throw std::invalid_argument("fractional_control: solution uses dollar controls");
  FractionalControl u;
  const GridFunction pi(s.pi, s.market.horizon());
  const GridFunction kappa(s.kappa, s.market.horizon());
  for (std::size_t k = 0; k < n_steps; ++k) {
    const double t = s.market.horizon() * static_cast<double>(k) / static_cast<double>(n_steps);
    u.pi.push_back(pi.at(t));
    u.kappa.push_back(kappa.at(t));
  }
  return u;
}

/// Exponential-utility controls re-solved at each step start time.
inline DollarControl dollar_control(const StrategySolution& s, std::size_t n_steps) {
  if (s.kind != ControlKind::dollar)
    throw std::invalid_argument("dollar_control: solution is not a deterministic dollar strategy");
  const double alpha = utility_alpha(s.utility);
  DollarControl u;
  for (std::size_t k = 0; k < n_steps; ++k) {
    const double t = s.market.horizon() * static_cast<double>(k) / static_cast<double>(n_steps);
    const ExponentialPoint pt = exponential_control_at(s.market, s.risk, alpha, t, s.options);
    u.pi_tilde.push_back(pt.pi_tilde);
    u.L.push_back(pt.L);
  }
  return u;
}

struct PathSet {
  std::vector<double> terminal;
  std::vector<int> jumps;
  /// Quadratic-feedback runs only.
  std::vector<double> z_terminal;
  /// Filled when requested; trajectories[i] has n_steps + 1 entries.
  std::vector<std::vector<double>> trajectories;
  std::size_t positivity_violations = 0;

  std::size_t size() const noexcept { return terminal.size(); }
  double min() const { return *std::min_element(terminal.begin(), terminal.end()); }
  double max() const { return *std::max_element(terminal.begin(), terminal.end()); }
};

struct SimOptions {
  unsigned threads = 1;
  bool store_trajectories = false;
};

inline void check_finite(double x, std::size_t path, std::size_t step) {
  if (!std::isfinite(x)) throw SimulationError("non-finite wealth", path, step);
}

/// Exact exponential scheme for (2) with step-constant controls. Returns X(T);
/// counts nonpositive values in `nonpositive` when given.
inline double fractional_path(const FractionalControl& u, const PathNoise& noise,
                              const StepCoefficients& c, const RiskParams& risk, double x0,
                              std::size_t path_id = 0, std::size_t* nonpositive = nullptr,
                              std::vector<double>* trajectory = nullptr) {
  const double side = risk.idiosyncratic_scale();
  // ln X is accumulated and exponentiated once per step, so rounding does not compound.
  double log_growth = 0.0;
  double x = x0;
  if (trajectory) trajectory->assign(1, x);
  for (std::size_t k = 0; k < noise.steps(); ++k) {
    const MarketPoint& m = c.market[k];
    const double pi = u.pi[k];
    const double kappa = u.kappa[k];
    const double drift = m.r + m.excess_return() * pi + (risk.p - risk.a) * kappa -
                         0.5 * m.sigma * m.sigma * pi * pi +
                         risk.rho * risk.b * m.sigma * pi * kappa -
                         0.5 * risk.b * risk.b * kappa * kappa;
    double log_step = drift * noise.dt + (m.sigma * pi - risk.rho * risk.b * kappa) * noise.dW1[k] -
                      side * kappa * noise.dW2[k];
    if (noise.dN[k] != 0) log_step += noise.dN[k] * std::log1p(-risk.gamma * kappa);
    log_growth += log_step;
    x = x0 * std::exp(log_growth);
    check_finite(x, path_id, k);
    if (nonpositive && !(x > 0.0)) ++*nonpositive;
    if (trajectory) trajectory->push_back(x);
  }
  return x;
}

/// Euler-Maruyama step of (1).
inline double dollar_step(double x, double pi_tilde, double L, const MarketPoint& m,
                          const RiskParams& risk, double dt, double dW1, double dW2, int dN) {
  return x + (m.r * x + m.excess_return() * pi_tilde + (risk.p - risk.a) * L) * dt +
         (m.sigma * pi_tilde - risk.rho * risk.b * L) * dW1 -
         risk.idiosyncratic_scale() * L * dW2 - risk.gamma * L * dN;
}

inline double dollar_path(const DollarControl& u, const PathNoise& noise, const StepCoefficients& c,
                          const RiskParams& risk, double x0, std::size_t path_id = 0,
                          std::vector<double>* trajectory = nullptr) {
  double x = x0;
  if (trajectory) trajectory->assign(1, x);
  for (std::size_t k = 0; k < noise.steps(); ++k) {
    x = dollar_step(x, u.pi_tilde[k], u.L[k], c.market[k], risk, noise.dt, noise.dW1[k],
                    noise.dW2[k], noise.dN[k]);
    check_finite(x, path_id, k);
    if (trajectory) trajectory->push_back(x);
  }
  return x;
}

/// Per-step data of the quadratic feedback rule on a simulation grid.
struct QuadraticSchedule {
  double z0 = 0.0;
  std::vector<double> unit_pi;     // pi_tilde per unit Z at t_k
  std::vector<double> unit_L;      // L per unit Z at t_k
  std::vector<double> log_drift;   // dt-coefficient of ln Z
  std::vector<double> w1_loading;  // -(mu - r)/sigma
  std::vector<double> w2_loading;  // b sqrt(1-rho^2) Phi
  std::vector<double> jump_log;    // ln(1 + gamma Phi)

  static QuadraticSchedule build(const QuadraticFeedback& rule, const StepCoefficients& c,
                                 const RiskParams& risk) {
    const QuadraticIngredients& q = rule.ingredients();
    QuadraticSchedule s;
    s.z0 = q.Z0;
    const double side = risk.idiosyncratic_scale();
    for (std::size_t k = 0; k < c.steps(); ++k) {
      const double t = c.times[k];
      const DollarPoint u = rule.per_unit(t);
      const double theta = c.market[k].sharpe();
      const double Phi = q.Phi.at(t);
      s.unit_pi.push_back(u.pi_tilde);
      s.unit_L.push_back(u.L);
      s.log_drift.push_back(-(0.5 * theta * theta + 0.5 * side * side * Phi * Phi +
                              risk.lambda * risk.gamma * Phi));
      s.w1_loading.push_back(-theta);
      s.w2_loading.push_back(side * Phi);
      s.jump_log.push_back(std::log1p(risk.gamma * Phi));
    }
    return s;
  }
};

/// Exact solution of dZ = Z_{t-}(-(mu-r)/sigma dW1 + b sqrt(1-rho^2) Phi dW2 + gamma Phi dM)
/// on the step grid; returns Z_0 .. Z_n.
inline std::vector<double> density_path(const QuadraticSchedule& s, const PathNoise& noise) {
  std::vector<double> z;
  z.reserve(noise.steps() + 1);
  z.push_back(s.z0);
  for (std::size_t k = 0; k < noise.steps(); ++k) {
    double log_step = s.log_drift[k] * noise.dt + s.w1_loading[k] * noise.dW1[k] +
                      s.w2_loading[k] * noise.dW2[k];
    if (noise.dN[k] != 0) log_step += noise.dN[k] * s.jump_log[k];
    z.push_back(z.back() * std::exp(log_step));
  }
  return z;
}

/// Dollar Euler scheme under the feedback rule evaluated at Z_k, with the
/// investment and liability legs scaled by the given factors.
inline double feedback_path(const QuadraticSchedule& s, const std::vector<double>& z,
                            const PathNoise& noise, const StepCoefficients& c,
                            const RiskParams& risk, double x0, double pi_scale = 1.0,
                            double L_scale = 1.0, std::size_t path_id = 0,
                            std::vector<double>* trajectory = nullptr) {
  double x = x0;
  if (trajectory) trajectory->assign(1, x);
  for (std::size_t k = 0; k < noise.steps(); ++k) {
    const double pi_tilde = pi_scale * s.unit_pi[k] * z[k];
    const double L = L_scale * s.unit_L[k] * z[k];
    x = dollar_step(x, pi_tilde, L, c.market[k], risk, noise.dt, noise.dW1[k], noise.dW2[k],
                    noise.dN[k]);
    check_finite(x, path_id, k);
    if (trajectory) trajectory->push_back(x);
  }
  return x;
}

namespace detail {

inline void check_horizon(const SimConfig& config, const MarketCoefficients& market) {
  config.validate();
  if (std::abs(config.horizon - market.horizon()) > 1e-12 * market.horizon())
    throw std::invalid_argument("simulation horizon differs from the market horizon");
}

template <class PathFn>
PathSet run_ensemble(const SimConfig& config, const RiskParams& risk, const SimOptions& opts,
                     PathFn&& fn, bool with_z) {
  PathSet out;
  out.terminal.resize(config.n_paths);
  out.jumps.resize(config.n_paths);
  if (with_z) out.z_terminal.resize(config.n_paths);
  if (opts.store_trajectories) out.trajectories.resize(config.n_paths);
  std::vector<std::size_t> nonpositive(config.n_paths, 0);
  parallel_for(config.n_paths, opts.threads, [&](std::size_t i) {
    const PathNoise noise =
        generate_path_noise(config.seed, i, config.n_steps, config.dt(), risk.lambda);
    std::vector<double>* traj = opts.store_trajectories ? &out.trajectories[i] : nullptr;
    double z_T = 0.0;
    out.terminal[i] = fn(i, noise, traj, nonpositive[i], z_T);
    out.jumps[i] = noise.jumps();
    if (with_z) out.z_terminal[i] = z_T;
  });
  for (std::size_t v : nonpositive) out.positivity_violations += v;
  return out;
}

}  // namespace detail

inline PathSet simulate_fractional(const FractionalControl& u, const SimConfig& config,
                                   const MarketCoefficients& market, const RiskParams& risk,
                                   const SimOptions& opts = {}) {
  detail::check_horizon(config, market);
  check_admissible(u, risk, config.n_steps);
  const StepCoefficients c = StepCoefficients::sample(market, config.n_steps);
  return detail::run_ensemble(
      config, risk, opts,
      [&](std::size_t i, const PathNoise& noise, std::vector<double>* traj, std::size_t& bad,
          double&) { return fractional_path(u, noise, c, risk, config.x0, i, &bad, traj); },
      false);
}

inline PathSet simulate_dollar(const DollarControl& u, const SimConfig& config,
                               const MarketCoefficients& market, const RiskParams& risk,
                               const SimOptions& opts = {}) {
  detail::check_horizon(config, market);
  check_admissible(u, config.n_steps);
  const StepCoefficients c = StepCoefficients::sample(market, config.n_steps);
  return detail::run_ensemble(
      config, risk, opts,
      [&](std::size_t i, const PathNoise& noise, std::vector<double>* traj, std::size_t& bad,
          double&) {
        const double x = dollar_path(u, noise, c, risk, config.x0, i, traj);
        if (!(x > 0.0)) ++bad;
        return x;
      },
      false);
}

/// Joint simulation of the density process Z and the optimal quadratic-utility wealth.
inline PathSet simulate_quadratic_feedback(const QuadraticIngredients& q, const SimConfig& config,
                                           const MarketCoefficients& market, const RiskParams& risk,
                                           const SimOptions& opts = {}) {
  detail::check_horizon(config, market);
  if (std::abs(q.x0 - config.x0) > 1e-15 * std::abs(q.x0))
    throw std::invalid_argument("quadratic ingredients were built for a different x0");
  const StepCoefficients c = StepCoefficients::sample(market, config.n_steps);
  const QuadraticSchedule s = QuadraticSchedule::build(QuadraticFeedback(q, market, risk), c, risk);
  return detail::run_ensemble(
      config, risk, opts,
      [&](std::size_t i, const PathNoise& noise, std::vector<double>* traj, std::size_t& bad,
          double& z_T) {
        const std::vector<double> z = density_path(s, noise);
        z_T = z.back();
        const double x = feedback_path(s, z, noise, c, risk, config.x0, 1.0, 1.0, i, traj);
        if (!(x > 0.0)) ++bad;
        return x;
      },
      true);
}

}  // namespace insurer
