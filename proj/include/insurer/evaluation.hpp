#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "insurer/errors.hpp"
#include "insurer/model.hpp"
#include "insurer/noise.hpp"
#include "insurer/parallel.hpp"
#include "insurer/roots.hpp"
#include "insurer/simulate.hpp"
#include "insurer/solvers.hpp"
#include "insurer/utility.hpp"

namespace insurer {

// ---------------------------------------------------------------------------
// Monte Carlo estimates
// ---------------------------------------------------------------------------

struct ConfidenceLevel {
  double level = 0.99;
  double z = 2.576;

  /// Two-sided normal quantile for an arbitrary level.
  static ConfidenceLevel of(double level) {
    if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("confidence level must be in (0,1)");
    const RootResult r = bisect([level](double z) { return std::erf(z / std::sqrt(2.0)) - level; },
                                0.0, 40.0, 1e-13);
    return {level, r.root};
  }
};

struct MCEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t n = 0;
  ConfidenceLevel confidence;

  double lower() const noexcept { return mean - confidence.z * std_error; }
  double upper() const noexcept { return mean + confidence.z * std_error; }
};

inline MCEstimate make_estimate(std::span<const double> values, ConfidenceLevel level = {}) {
  if (values.empty()) throw std::invalid_argument("make_estimate: no samples");
  MCEstimate e;
  e.n = values.size();
  e.confidence = level;
  e.mean = compensated_sum(values) / static_cast<double>(e.n);
  if (e.n > 1) {
    std::vector<double> sq(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) sq[i] = (values[i] - e.mean) * (values[i] - e.mean);
    const double var = compensated_sum(sq) / static_cast<double>(e.n - 1);
    e.std_error = std::sqrt(var / static_cast<double>(e.n));
  }
  return e;
}

inline MCEstimate estimate_expected_utility(const PathSet& paths, const UtilitySpec& u,
                                            ConfidenceLevel level = {}) {
  if (paths.terminal.empty()) throw std::invalid_argument("estimate_expected_utility: no paths");
  std::vector<std::size_t> bad;
  for (std::size_t i = 0; i < paths.size(); ++i)
    if (!in_domain(u, paths.terminal[i])) bad.push_back(i);
  if (!bad.empty()) {
    std::string msg = "estimate_expected_utility: " + std::to_string(bad.size()) +
                      " path(s) outside the utility domain:";
    for (std::size_t i = 0; i < std::min<std::size_t>(bad.size(), 10); ++i)
      msg += " " + std::to_string(bad[i]);
    throw DomainError(msg);
  }
  std::vector<double> values(paths.size());
  for (std::size_t i = 0; i < paths.size(); ++i) values[i] = utility(u, paths.terminal[i]);
  return make_estimate(values, level);
}

// ---------------------------------------------------------------------------
// Brute-force oracle for the log objective
// ---------------------------------------------------------------------------

struct OracleOptions {
  double pi_lo = 0.0;
  double pi_hi = 3.0;
  double kappa_lo = 0.0;
  /// Upper debt-ratio bound; negative means (1 - 1e-6)/gamma.
  double kappa_hi = -1.0;
  double spacing = 1e-3;
  int refinements = 2;
  std::size_t grid_index = 0;
  unsigned threads = 1;
};

struct OracleResult {
  double pi = 0.0;
  double kappa = 0.0;
  double value = -std::numeric_limits<double>::infinity();
  /// Spacing of the last scan.
  double spacing = 0.0;
  int refinement_depth = 0;
  std::size_t evaluations = 0;
  bool on_boundary = false;
};

namespace detail {

inline std::size_t grid_count(double lo, double hi, double h) {
  return static_cast<std::size_t>(std::floor((hi - lo) / h + 1e-9)) + 1;
}

/// Exhaustive scan of f over the lattice lo + i h, keeping the first maximum in
/// (pi, kappa) lexicographic order.
inline OracleResult scan_log_objective(const MarketPoint& m, const RiskParams& k, double pi_lo,
                                       double pi_hi, double kappa_lo, double kappa_hi, double h,
                                       unsigned threads) {
  const std::size_t n_pi = grid_count(pi_lo, pi_hi, h);
  const std::size_t n_kappa = grid_count(kappa_lo, kappa_hi, h);
  std::vector<double> kappa_part(n_kappa);
  for (std::size_t j = 0; j < n_kappa; ++j) {
    const double kappa = kappa_lo + static_cast<double>(j) * h;
    kappa_part[j] = (k.p - k.a) * kappa - 0.5 * k.b * k.b * kappa * kappa +
                    k.lambda * std::log(1.0 - k.gamma * kappa);
  }
  const double cross = k.rho * k.b * m.sigma;
  std::vector<double> row_best(n_pi, -std::numeric_limits<double>::infinity());
  std::vector<std::size_t> row_arg(n_pi, 0);
  parallel_for(n_pi, threads, [&](std::size_t i) {
    const double pi = pi_lo + static_cast<double>(i) * h;
    const double pi_part = m.r + m.excess_return() * pi - 0.5 * m.sigma * m.sigma * pi * pi;
    const double c = cross * pi;
    double best = -std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (std::size_t j = 0; j < n_kappa; ++j) {
      const double kappa = kappa_lo + static_cast<double>(j) * h;
      const double v = pi_part + kappa_part[j] + c * kappa;
      if (v > best) {
        best = v;
        arg = j;
      }
    }
    row_best[i] = best;
    row_arg[i] = arg;
  });
  OracleResult r;
  std::size_t best_i = 0;
  for (std::size_t i = 0; i < n_pi; ++i) {
    if (row_best[i] > r.value) {
      r.value = row_best[i];
      best_i = i;
    }
  }
  r.pi = pi_lo + static_cast<double>(best_i) * h;
  r.kappa = kappa_lo + static_cast<double>(row_arg[best_i]) * h;
  r.spacing = h;
  r.evaluations = n_pi * n_kappa;
  return r;
}

}  // namespace detail

/// Maximises the log objective over a rectangle by exhaustive search, then
/// refines twice by 10x in a window of two cells around the incumbent.
inline OracleResult grid_oracle_log(const MarketCoefficients& market, const RiskParams& risk,
                                    OracleOptions opts = {}) {
  if (opts.grid_index >= market.grid_size()) throw std::invalid_argument("oracle: grid index out of range");
  if (opts.kappa_hi < 0.0) opts.kappa_hi = (1.0 - 1e-6) / risk.gamma;
  opts.kappa_hi = std::min(opts.kappa_hi, (1.0 - 1e-12) / risk.gamma);
  if (!(opts.spacing > 0.0) || !(opts.pi_hi >= opts.pi_lo) || !(opts.kappa_hi >= opts.kappa_lo) ||
      opts.kappa_lo < 0.0)
    throw std::invalid_argument("oracle: empty search range");
  const MarketPoint m = market.point(opts.grid_index);

  OracleResult best = detail::scan_log_objective(m, risk, opts.pi_lo, opts.pi_hi, opts.kappa_lo,
                                                 opts.kappa_hi, opts.spacing, opts.threads);
  std::size_t evaluations = best.evaluations;
  double h = opts.spacing;
  for (int depth = 1; depth <= opts.refinements; ++depth) {
    const double lo_pi = std::max(opts.pi_lo, best.pi - 2.0 * h);
    const double hi_pi = std::min(opts.pi_hi, best.pi + 2.0 * h);
    const double lo_k = std::max(opts.kappa_lo, best.kappa - 2.0 * h);
    const double hi_k = std::min(opts.kappa_hi, best.kappa + 2.0 * h);
    h /= 10.0;
    OracleResult next = detail::scan_log_objective(m, risk, lo_pi, hi_pi, lo_k, hi_k, h, opts.threads);
    evaluations += next.evaluations;
    if (next.value >= best.value) best = next;
    best.spacing = h;
    best.refinement_depth = depth;
  }
  best.evaluations = evaluations;
  const double edge = 0.5 * h;
  best.on_boundary = best.pi <= opts.pi_lo + edge || best.pi >= opts.pi_hi - edge ||
                     best.kappa <= opts.kappa_lo + edge || best.kappa >= opts.kappa_hi - edge;
  return best;
}

struct SurfaceSample {
  double pi;
  double kappa;
  double f;
};

/// f sampled on a lattice, for plotting.
inline std::vector<SurfaceSample> log_objective_surface(const MarketCoefficients& market,
                                                        const RiskParams& risk, OracleOptions opts) {
  if (opts.kappa_hi < 0.0) opts.kappa_hi = (1.0 - 1e-6) / risk.gamma;
  const MarketPoint m = market.point(opts.grid_index);
  std::vector<SurfaceSample> out;
  const std::size_t n_pi = detail::grid_count(opts.pi_lo, opts.pi_hi, opts.spacing);
  const std::size_t n_k = detail::grid_count(opts.kappa_lo, opts.kappa_hi, opts.spacing);
  for (std::size_t i = 0; i < n_pi; ++i) {
    for (std::size_t j = 0; j < n_k; ++j) {
      const double pi = opts.pi_lo + static_cast<double>(i) * opts.spacing;
      const double kappa = opts.kappa_lo + static_cast<double>(j) * opts.spacing;
      out.push_back({pi, kappa, log_objective(pi, kappa, m, risk)});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Common-noise panels of controls
// ---------------------------------------------------------------------------

/// A competitor to the optimal strategy: either the optimal controls with the
/// investment and risk legs scaled, or a constant control.
struct Challenger {
  std::string label;
  double pi_scale = 1.0;
  double risk_scale = 1.0;
  /// (pi, kappa) for fractional utilities, (pi_tilde, L) otherwise.
  std::optional<std::pair<double, double>> constant;
};

inline std::vector<Challenger> default_challengers() {
  return {{"zero", 0.0, 0.0, std::nullopt},
          {"half_optimal", 0.5, 0.5, std::nullopt},
          {"investment_x1.1", 1.1, 1.0, std::nullopt},
          {"risk_x1.1", 1.0, 1.1, std::nullopt}};
}

/// Riskless, half-optimal, perturbed-optimal and single-asset controls.
inline std::vector<Challenger> constancy_panel() {
  auto panel = default_challengers();
  panel.push_back({"investment_only", 1.0, 0.0, std::nullopt});
  return panel;
}

/// Terminal wealth of the optimal strategy (row 0) and of every challenger
/// (rows 1..), all driven by the same noise.
struct PanelResult {
  std::vector<std::vector<double>> terminal;
  std::vector<double> z_terminal;
};

inline PanelResult simulate_panel(const StrategySolution& s, const std::vector<Challenger>& challengers,
                                  const SimConfig& config, unsigned threads = 1) {
  detail::check_horizon(config, s.market);
  const std::size_t n = config.n_steps;
  const StepCoefficients c = StepCoefficients::sample(s.market, n);
  const std::size_t rows = challengers.size() + 1;
  PanelResult out;
  out.terminal.assign(rows, std::vector<double>(config.n_paths));

  auto scaled = [&](const auto& base, auto make_const) {
    std::vector<std::decay_t<decltype(base)>> controls{base};
    for (const Challenger& ch : challengers) {
      if (ch.constant) {
        controls.push_back(make_const(ch.constant->first, ch.constant->second));
        continue;
      }
      auto u = base;
      auto& [first, second] = u;
      for (auto& v : first) v *= ch.pi_scale;
      for (auto& v : second) v *= ch.risk_scale;
      controls.push_back(std::move(u));
    }
    return controls;
  };

  if (s.kind == ControlKind::fractional) {
    const auto controls = scaled(fractional_control(s, n), [n](double a, double b) {
      return FractionalControl::constant(a, b, n);
    });
    for (const auto& u : controls) check_admissible(u, s.risk, n);
    parallel_for(config.n_paths, threads, [&](std::size_t i) {
      const PathNoise noise = generate_path_noise(config.seed, i, n, config.dt(), s.risk.lambda);
      for (std::size_t r = 0; r < rows; ++r)
        out.terminal[r][i] = fractional_path(controls[r], noise, c, s.risk, config.x0, i);
    });
  } else if (s.kind == ControlKind::dollar) {
    const auto controls = scaled(dollar_control(s, n), [n](double a, double b) {
      return DollarControl::constant(a, b, n);
    });
    for (const auto& u : controls) check_admissible(u, n);
    parallel_for(config.n_paths, threads, [&](std::size_t i) {
      const PathNoise noise = generate_path_noise(config.seed, i, n, config.dt(), s.risk.lambda);
      for (std::size_t r = 0; r < rows; ++r)
        out.terminal[r][i] = dollar_path(controls[r], noise, c, s.risk, config.x0, i);
    });
  } else {
    if (std::abs(s.quadratic->x0 - config.x0) > 1e-15 * std::abs(config.x0))
      throw std::invalid_argument("quadratic solution was built for a different x0");
    const QuadraticSchedule sched = QuadraticSchedule::build(s.feedback(), c, s.risk);
    out.z_terminal.resize(config.n_paths);
    for (const Challenger& ch : challengers) {
      if (ch.constant) check_admissible(DollarControl::constant(ch.constant->first, ch.constant->second, n), n);
      else if (ch.risk_scale < 0.0) throw AdmissibilityError("negative liability scale");
    }
    parallel_for(config.n_paths, threads, [&](std::size_t i) {
      const PathNoise noise = generate_path_noise(config.seed, i, n, config.dt(), s.risk.lambda);
      const std::vector<double> z = density_path(sched, noise);
      out.z_terminal[i] = z.back();
      out.terminal[0][i] = feedback_path(sched, z, noise, c, s.risk, config.x0, 1.0, 1.0, i);
      for (std::size_t r = 1; r < rows; ++r) {
        const Challenger& ch = challengers[r - 1];
        out.terminal[r][i] =
            ch.constant ? dollar_path(DollarControl::constant(ch.constant->first, ch.constant->second, n),
                                      noise, c, s.risk, config.x0, i)
                        : feedback_path(sched, z, noise, c, s.risk, config.x0, ch.pi_scale,
                                        ch.risk_scale, i);
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dominance of the optimal strategy
// ---------------------------------------------------------------------------

struct DominanceEntry {
  std::string label;
  MCEstimate utility;
  /// Paired difference J(u*) - J(u).
  MCEstimate delta;
  bool pass = false;
};

struct DominanceReport {
  MCEstimate optimal_utility;
  std::vector<DominanceEntry> entries;
  bool pass = true;
};

inline std::vector<double> utilities_of(const UtilitySpec& u, const std::vector<double>& x,
                                        const std::string& label) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!in_domain(u, x[i]))
      throw DomainError("utility domain breached by control '" + label + "' on path " +
                        std::to_string(i));
    out[i] = utility(u, x[i]);
  }
  return out;
}

/// J(u*) - J(u) >= -3 paired standard errors for every challenger.
inline DominanceReport dominance_test(const StrategySolution& s,
                                      const std::vector<Challenger>& challengers,
                                      const SimConfig& config, unsigned threads = 1,
                                      ConfidenceLevel level = {}) {
  const PanelResult panel = simulate_panel(s, challengers, config, threads);
  const std::vector<double> optimal = utilities_of(s.utility, panel.terminal[0], "optimal");
  DominanceReport report;
  report.optimal_utility = make_estimate(optimal, level);
  for (std::size_t r = 1; r < panel.terminal.size(); ++r) {
    const std::string& label = challengers[r - 1].label;
    const std::vector<double> other = utilities_of(s.utility, panel.terminal[r], label);
    std::vector<double> diff(other.size());
    for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = optimal[i] - other[i];
    DominanceEntry e{label, make_estimate(other, level), make_estimate(diff, level), false};
    e.pass = e.delta.mean >= -3.0 * e.delta.std_error;
    report.pass = report.pass && e.pass;
    report.entries.push_back(std::move(e));
  }
  return report;
}

// ---------------------------------------------------------------------------
// Constancy of E[U'(X*_T) X^u_T] across controls
// ---------------------------------------------------------------------------

struct ConstancyEntry {
  std::string label;
  MCEstimate value;
};

struct ConstancyReport {
  std::vector<ConstancyEntry> entries;  // entries[0] is the optimal control
  /// Largest |c_i - c_j| / sqrt(se_i^2 + se_j^2) over all pairs.
  double max_pairwise_z = 0.0;
  bool pass = true;
};

inline ConstancyReport constancy_check(const StrategySolution& s,
                                       const std::vector<Challenger>& test_controls,
                                       const SimConfig& config, unsigned threads = 1,
                                       ConfidenceLevel level = {}) {
  const PanelResult panel = simulate_panel(s, test_controls, config, threads);
  const std::vector<double>& star = panel.terminal[0];
  ConstancyReport report;
  for (std::size_t r = 0; r < panel.terminal.size(); ++r) {
    const std::string label = r == 0 ? "optimal" : test_controls[r - 1].label;
    std::vector<double> v(star.size());
    for (std::size_t i = 0; i < star.size(); ++i) {
      if (!in_domain(s.utility, star[i]))
        throw DomainError("optimal wealth outside the utility domain on path " + std::to_string(i));
      v[i] = marginal_utility_times(s.utility, star[i], panel.terminal[r][i]);
    }
    report.entries.push_back({label, make_estimate(v, level)});
  }
  for (std::size_t i = 0; i < report.entries.size(); ++i) {
    for (std::size_t j = i + 1; j < report.entries.size(); ++j) {
      const MCEstimate& a = report.entries[i].value;
      const MCEstimate& b = report.entries[j].value;
      const double diff = std::abs(a.mean - b.mean);
      const double se = std::sqrt(a.std_error * a.std_error + b.std_error * b.std_error);
      const double z = se > 0.0 ? diff / se : (diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
      report.max_pairwise_z = std::max(report.max_pairwise_z, z);
      if (!(diff <= 3.0 * se)) report.pass = false;
    }
  }
  return report;
}

/// ln X_T - ln x0 - int f dt under a fractional control; mean zero for every
/// admissible deterministic control.
inline MCEstimate log_wealth_identity_gap(const MarketCoefficients& market, const RiskParams& risk,
                                          const FractionalControl& u, const SimConfig& config,
                                          unsigned threads = 1) {
  const PathSet paths = simulate_fractional(u, config, market, risk, {threads, false});
  const StepCoefficients c = StepCoefficients::sample(market, config.n_steps);
  std::vector<double> drift(config.n_steps);
  for (std::size_t k = 0; k < config.n_steps; ++k)
    drift[k] = log_objective(u.pi[k], u.kappa[k], c.market[k], risk) * c.dt;
  const double integral = compensated_sum(drift);
  std::vector<double> gap(paths.size());
  for (std::size_t i = 0; i < paths.size(); ++i)
    gap[i] = std::log(paths.terminal[i]) - std::log(config.x0) - integral;
  return make_estimate(gap);
}

// ---------------------------------------------------------------------------
// Convergence studies over a dt ladder
// ---------------------------------------------------------------------------

struct ConvergenceRung {
  std::size_t n_steps = 0;
  double dt = 0.0;
  MCEstimate error;
  /// log2(previous error / error) scaled by the dt ratio; NaN on the first rung.
  double order = std::numeric_limits<double>::quiet_NaN();
};

struct ConvergenceTable {
  std::vector<ConvergenceRung> rungs;

  bool monotone_decreasing() const {
    for (std::size_t i = 1; i < rungs.size(); ++i)
      if (!(rungs[i].error.mean < rungs[i - 1].error.mean)) return false;
    return true;
  }
  double finest_over_coarsest() const { return rungs.back().error.mean / rungs.front().error.mean; }
};

/// Runs `path_error(noise, rung)` for every path and rung. Noise is generated at
/// the finest rung and aggregated, so all rungs share the same Brownian and
/// Poisson paths. `ladder` lists step counts, coarse to fine; each must divide
/// the finest.
template <class PathError>
ConvergenceTable convergence_study(const std::vector<std::size_t>& ladder, const SimConfig& config,
                                   double lambda, unsigned threads, PathError&& path_error) {
  if (ladder.size() < 3) throw std::invalid_argument("convergence_study: need at least 3 rungs");
  config.validate();
  const std::size_t finest = *std::max_element(ladder.begin(), ladder.end());
  for (std::size_t n : ladder)
    if (n == 0 || finest % n != 0) throw std::invalid_argument("convergence_study: rung does not divide finest");
  const double fine_dt = config.horizon / static_cast<double>(finest);
  std::vector<std::vector<double>> errors(ladder.size(), std::vector<double>(config.n_paths));
  parallel_for(config.n_paths, threads, [&](std::size_t i) {
    const PathNoise fine = generate_path_noise(config.seed, i, finest, fine_dt, lambda);
    for (std::size_t r = 0; r < ladder.size(); ++r) {
      const std::size_t factor = finest / ladder[r];
      errors[r][i] = factor == 1 ? path_error(fine, r) : path_error(aggregate(fine, factor), r);
    }
  });
  ConvergenceTable table;
  for (std::size_t r = 0; r < ladder.size(); ++r) {
    ConvergenceRung rung;
    rung.n_steps = ladder[r];
    rung.dt = config.horizon / static_cast<double>(ladder[r]);
    rung.error = make_estimate(errors[r]);
    if (r > 0) {
      const ConvergenceRung& prev = table.rungs.back();
      rung.order = std::log(prev.error.mean / rung.error.mean) / std::log(prev.dt / rung.dt);
    }
    table.rungs.push_back(rung);
  }
  return table;
}

/// E|Z_T - (1 - alpha X_T)| for the optimal quadratic-utility strategy.
inline ConvergenceTable quadratic_identity_study(const StrategySolution& s, const SimConfig& config,
                                                 const std::vector<std::size_t>& ladder,
                                                 unsigned threads = 1) {
  if (s.kind != ControlKind::feedback) throw std::invalid_argument("quadratic_identity_study: not quadratic");
  detail::check_horizon(config, s.market);
  const double alpha = s.quadratic->alpha;
  std::vector<StepCoefficients> coeffs;
  std::vector<QuadraticSchedule> schedules;
  for (std::size_t n : ladder) {
    coeffs.push_back(StepCoefficients::sample(s.market, n));
    schedules.push_back(QuadraticSchedule::build(s.feedback(), coeffs.back(), s.risk));
  }
  return convergence_study(ladder, config, s.risk.lambda, threads,
                           [&](const PathNoise& noise, std::size_t r) {
                             const std::vector<double> z = density_path(schedules[r], noise);
                             const double x = feedback_path(schedules[r], z, noise, coeffs[r],
                                                            s.risk, config.x0);
                             return std::abs(z.back() - (1.0 - alpha * x));
                           });
}

/// E|X_Euler(T) - X_exact(T)| for constant fractional controls (pi, kappa):
/// the dollar Euler scheme with pi_tilde = pi X and L = kappa X against the
/// exact exponential scheme on the same increments.
inline ConvergenceTable euler_vs_exact_study(const MarketCoefficients& market, const RiskParams& risk,
                                             double pi, double kappa, const SimConfig& config,
                                             const std::vector<std::size_t>& ladder,
                                             unsigned threads = 1) {
  detail::check_horizon(config, market);
  std::vector<StepCoefficients> coeffs;
  std::vector<FractionalControl> controls;
  for (std::size_t n : ladder) {
    coeffs.push_back(StepCoefficients::sample(market, n));
    controls.push_back(FractionalControl::constant(pi, kappa, n));
    check_admissible(controls.back(), risk, n);
  }
  return convergence_study(ladder, config, risk.lambda, threads,
                           [&](const PathNoise& noise, std::size_t r) {
                             const double exact = fractional_path(controls[r], noise, coeffs[r], risk, config.x0);
                             double x = config.x0;
                             for (std::size_t k = 0; k < noise.steps(); ++k)
                               x = dollar_step(x, pi * x, kappa * x, coeffs[r].market[k], risk,
                                               noise.dt, noise.dW1[k], noise.dW2[k], noise.dN[k]);
                             return std::abs(x - exact);
                           });
}

}  // namespace insurer
