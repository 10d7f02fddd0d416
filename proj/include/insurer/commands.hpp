#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "insurer/evaluation.hpp"
#include "insurer/io.hpp"
#include "insurer/simulate.hpp"
#include "insurer/solvers.hpp"

namespace insurer::cli {

enum ExitCode : int { ok = 0, io_error = 1, precondition = 2, verification_failed = 3 };

struct Invocation {
  std::string command;
  std::string config_path;
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  unsigned threads = 1;
  bool clamp_zero = false;
};

inline const char* const kCommands[] = {"solve", "simulate", "evaluate", "oracle", "verify", "sweep"};

namespace detail {

struct Context {
  const Invocation& inv;
  RunConfig config;
  std::ostream& out;
  std::ostream& err;

  SolveOptions solve_options() const {
    SolveOptions o;
    o.clamp_zero = inv.clamp_zero;
    return o;
  }

  StrategySolution solve() const {
    return insurer::solve(config.market, config.risk, config.utility, config.sim.x0, solve_options());
  }

  void require_seed() const {
    if (!config.has_seed) throw ConfigError("a seed is required: pass --seed or set simulation.seed");
  }

  std::optional<std::filesystem::path> out_path(const std::string& name) const {
    if (!inv.out_dir) return std::nullopt;
    return std::filesystem::path(*inv.out_dir) / name;
  }

  void write_file(const std::filesystem::path& p, const std::string& text) const {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw ConfigError("cannot write '" + p.string() + "'");
    f << text;
    if (!f) throw ConfigError("write failed for '" + p.string() + "'");
  }

  /// Prints a JSON report and mirrors it into the output directory.
  void emit(const Json& report, const std::string& name) const {
    const std::string text = to_json_text(report);
    out << text;
    if (auto p = out_path(name)) write_file(*p, text);
  }
};

inline void check_parameters(const Context& c) {
  const ValidationReport report = validate_params(c.config.market, c.config.risk);
  for (const auto& w : c.inv.command == "sweep" ? std::vector<std::string>{} : report.warnings)
    c.err << "warning: " << w << '\n';
  if (report.ok()) return;
  std::string msg = "invalid parameters:";
  for (const auto& v : report.violations) msg += "\n  " + v;
  throw ConfigError(msg);
}

/// Expands challengers into explicit labels for reports.
inline Json challenger_json(const Challenger& ch) {
  Json j{{"label", ch.label}};
  if (ch.constant) {
    j["constant"] = Json::array({ch.constant->first, ch.constant->second});
  } else {
    j["pi_scale"] = ch.pi_scale;
    j["risk_scale"] = ch.risk_scale;
  }
  return j;
}

inline Json sim_json(const SimConfig& s) {
  return Json{{"x0", s.x0}, {"T", s.horizon}, {"n_steps", s.n_steps}, {"n_paths", s.n_paths}, {"seed", s.seed}};
}

inline int cmd_solve(const Context& c) {
  const StrategySolution s = c.solve();
  c.emit(solve_report(s), "solve.json");
  return ok;
}

inline int cmd_simulate(const Context& c) {
  c.require_seed();
  if (!c.inv.out_dir) throw ConfigError("simulate writes a CSV and needs --out <dir>");
  const StrategySolution s = c.solve();
  const SimConfig& sim = c.config.sim;
  std::vector<Challenger> single;
  if (c.config.control) single.push_back(*c.config.control);
  PathSet paths;
  // Row 0 of a panel is the optimal strategy; a configured control is row 1.
  const PanelResult panel = simulate_panel(s, single, sim, c.inv.threads);
  paths.terminal = panel.terminal.back();
  paths.z_terminal = c.config.control ? std::vector<double>{} : panel.z_terminal;
  paths.jumps.resize(sim.n_paths);
  for (std::size_t i = 0; i < sim.n_paths; ++i) {
    paths.jumps[i] = generate_path_noise(sim.seed, i, sim.n_steps, sim.dt(), c.config.risk.lambda).jumps();
    if (!(paths.terminal[i] > 0.0)) ++paths.positivity_violations;
  }

  std::ostringstream csv;
  CsvWriter w(csv);
  const bool with_z = !paths.z_terminal.empty();
  if (with_z) w.header({"path_id", "X_T", "jumps", "Z_T"});
  else w.header({"path_id", "X_T", "jumps"});
  for (std::size_t i = 0; i < paths.size(); ++i) {
    w.cell(i).cell(paths.terminal[i]).cell(paths.jumps[i]);
    if (with_z) w.cell(paths.z_terminal[i]);
    w.end_row();
  }
  c.write_file(*c.out_path("simulate_paths.csv"), csv.str());

  const MCEstimate x = make_estimate(paths.terminal);
  Json summary{{"utility", utility_json(s.utility)},
               {"control", c.config.control ? challenger_json(*c.config.control) : Json("optimal")},
               {"simulation", sim_json(sim)},
               {"mean", x.mean},
               {"stderr", x.std_error},
               {"min", paths.min()},
               {"max", paths.max()},
               {"positivity_violations", paths.positivity_violations}};
  if (s.kind != ControlKind::fractional || c.config.control)
    summary["positivity_note"] = "dollar and scaled feedback controls carry no positivity guarantee";
  c.emit(summary, "simulate_summary.json");
  return ok;
}

inline int cmd_evaluate(const Context& c) {
  c.require_seed();
  const StrategySolution s = c.solve();
  const PanelResult panel = simulate_panel(s, c.config.challengers, c.config.sim, c.inv.threads);
  Json estimates = Json::array();
  for (std::size_t r = 0; r < panel.terminal.size(); ++r) {
    PathSet p;
    p.terminal = panel.terminal[r];
    Json e = r == 0 ? Json{{"label", "optimal"}} : challenger_json(c.config.challengers[r - 1]);
    e["expected_utility"] = to_json(estimate_expected_utility(p, s.utility));
    estimates.push_back(std::move(e));
  }
  Json report{{"utility", utility_json(s.utility)},
              {"simulation", sim_json(c.config.sim)},
              {"non_optimal", s.non_optimal},
              {"estimates", estimates}};
  if (std::holds_alternative<LogUtility>(s.utility)) {
    const StepCoefficients coeffs = StepCoefficients::sample(s.market, c.config.sim.n_steps);
    const FractionalControl u = fractional_control(s, c.config.sim.n_steps);
    double integral = 0.0;
    for (std::size_t k = 0; k < coeffs.steps(); ++k)
      integral += log_objective(u.pi[k], u.kappa[k], coeffs.market[k], s.risk) * coeffs.dt;
    report["log_identity"] = Json{{"ln_x0_plus_integral_f", std::log(c.config.sim.x0) + integral}};
  }
  if (s.quadratic) {
    std::vector<double> gap(panel.z_terminal.size());
    for (std::size_t i = 0; i < gap.size(); ++i)
      gap[i] = std::abs(panel.z_terminal[i] - (1.0 - s.quadratic->alpha * panel.terminal[0][i]));
    report["quadratic_identity_error"] = to_json(make_estimate(gap));
  }
  c.emit(report, "evaluate.json");
  return ok;
}

inline int cmd_oracle(const Context& c) {
  if (!std::holds_alternative<LogUtility>(c.config.utility))
    throw ConfigError("oracle: only the log utility has a pointwise objective to scan");
  const StrategySolution s = c.solve();
  OracleOptions opts = c.config.oracle.options;
  opts.threads = c.inv.threads;
  Json points = Json::array();
  for (std::size_t j = 0; j < s.market.grid_size(); ++j) {
    opts.grid_index = j;
    const OracleResult o = grid_oracle_log(s.market, s.risk, opts);
    const MarketPoint m = s.market.point(j);
    points.push_back(Json{{"t", s.times[j]},
                          {"pi_hat", o.pi},
                          {"kappa_hat", o.kappa},
                          {"f_hat", o.value},
                          {"spacing", o.spacing},
                          {"refinement_depth", o.refinement_depth},
                          {"evaluations", o.evaluations},
                          {"on_boundary", o.on_boundary},
                          {"pi_star", s.pi[j]},
                          {"kappa_star", s.kappa[j]},
                          {"f_star", log_objective(s.pi[j], s.kappa[j], m, s.risk)},
                          {"max_abs_difference",
                           std::max(std::abs(o.pi - s.pi[j]), std::abs(o.kappa - s.kappa[j]))}});
  }
  Json report{{"utility", utility_json(s.utility)}, {"non_optimal", s.non_optimal}, {"points", points}};
  if (c.config.oracle.surface_spacing > 0.0) {
    if (!c.inv.out_dir) throw ConfigError("oracle.surface_spacing needs --out <dir>");
    OracleOptions surf = c.config.oracle.options;
    surf.spacing = c.config.oracle.surface_spacing;
    std::ostringstream csv;
    CsvWriter w(csv);
    w.header({"pi", "kappa", "f"});
    for (const SurfaceSample& p : log_objective_surface(s.market, s.risk, surf)) {
      w.cell(p.pi).cell(p.kappa).cell(p.f);
      w.end_row();
    }
    c.write_file(*c.out_path("oracle_surface.csv"), csv.str());
    report["surface_csv"] = "oracle_surface.csv";
  }
  c.emit(report, "oracle.json");
  return ok;
}

inline int cmd_verify(const Context& c) {
  c.require_seed();
  const StrategySolution s = c.solve();
  const RunConfig& cfg = c.config;
  Json checks = Json::array();
  bool pass = true;
  auto check = [&](const std::string& name, bool ok_, Json detail) {
    pass = pass && ok_;
    checks.push_back(Json{{"check", name}, {"pass", ok_}, {"detail", std::move(detail)}});
  };

  check("strategy_optimal", !s.non_optimal,
        Json{{"non_optimal", s.non_optimal}, {"clamped_points", s.clamped_points.size()}});

  const double foc = s.foc_residual_max();
  const double ker = kernel_residual_max(s);
  check("residuals", foc < 1e-10 && ker < 1e-10,
        Json{{"foc_residual_max", foc}, {"kernel_residual_max", ker}, {"tolerance", 1e-10}});

  const DominanceReport dom = dominance_test(s, cfg.challengers, cfg.sim, c.inv.threads);
  Json dom_entries = Json::array();
  for (const DominanceEntry& e : dom.entries)
    dom_entries.push_back(Json{{"label", e.label},
                               {"expected_utility", to_json(e.utility)},
                               {"delta", e.delta.mean},
                               {"paired_stderr", e.delta.std_error},
                               {"pass", e.pass}});
  check("dominance", dom.pass,
        Json{{"optimal_expected_utility", to_json(dom.optimal_utility)}, {"challengers", dom_entries}});

  const ConstancyReport con = constancy_check(s, cfg.constancy, cfg.sim, c.inv.threads);
  Json con_entries = Json::array();
  for (const ConstancyEntry& e : con.entries)
    con_entries.push_back(Json{{"label", e.label}, {"value", to_json(e.value)}});
  bool con_pass = con.pass;
  if (std::holds_alternative<LogUtility>(s.utility)) {
    const MCEstimate& star = con.entries.front().value;
    con_pass = con_pass && star.mean == 1.0 && star.std_error == 0.0;
  }
  check("constancy", con_pass, Json{{"max_pairwise_z", con.max_pairwise_z}, {"entries", con_entries}});

  if (std::holds_alternative<LogUtility>(s.utility)) {
    const MCEstimate gap = log_wealth_identity_gap(s.market, s.risk, fractional_control(s, cfg.sim.n_steps),
                                                   cfg.sim, c.inv.threads);
    check("log_identity", std::abs(gap.mean) <= 3.0 * gap.std_error,
          Json{{"gap", to_json(gap)}});
  }

  if (s.quadratic && !cfg.ladder.empty()) {
    const ConvergenceTable t = quadratic_identity_study(s, cfg.sim, cfg.ladder, c.inv.threads);
    Json rungs = Json::array();
    for (const ConvergenceRung& r : t.rungs)
      rungs.push_back(Json{{"n_steps", r.n_steps}, {"error", to_json(r.error)}, {"order", r.order}});
    check("quadratic_identity", t.monotone_decreasing(),
          Json{{"finest_over_coarsest", t.finest_over_coarsest()}, {"rungs", rungs}});
  }

  Json report{{"utility", utility_json(s.utility)},
              {"simulation", sim_json(cfg.sim)},
              {"verdict", pass ? "PASS" : "FAIL"},
              {"checks", checks}};
  c.emit(report, "verify.json");
  return pass ? ok : verification_failed;
}

inline int cmd_sweep(const Context& c) {
  if (!c.config.sweep) throw ConfigError("sweep: config has no 'sweep' section");
  const SweepConfig& sw = *c.config.sweep;
  std::ostringstream csv;
  CsvWriter w(csv);
  w.header({"param", "pi_star", "kappa_star_or_L", "condition_margin"});
  for (double v : sw.values) {
    RunConfig cfg = c.config;
    set_parameter(cfg, sw.param, v);
    const Context inner{c.inv, cfg, c.out, c.err};
    check_parameters(inner);
    const StrategySolution s = inner.solve();
    double pi = 0.0, risk = 0.0;
    if (s.kind == ControlKind::fractional) {
      pi = s.pi.front();
      risk = s.kappa.front();
    } else if (s.kind == ControlKind::dollar) {
      pi = s.pi_tilde.front();
      risk = s.L.front();
    } else {
      // Feedback controls at t = 0, where Z = Z0.
      pi = s.pi_tilde.front() * s.quadratic->Z0;
      risk = s.L.front() * s.quadratic->Z0;
    }
    w.cell(v).cell(pi).cell(risk).cell(s.margin.min);
    w.end_row();
  }
  c.out << csv.str();
  if (auto p = c.out_path("sweep.csv")) c.write_file(*p, csv.str());
  return ok;
}

}  // namespace detail

/// Runs one subcommand; never throws.
inline int run(const Invocation& inv, std::ostream& out, std::ostream& err) {
  try {
    if (inv.out_dir) {
      std::error_code ec;
      std::filesystem::create_directories(*inv.out_dir, ec);
      if (ec) throw ConfigError("cannot create output directory '" + *inv.out_dir + "': " + ec.message());
    }
    RunConfig config = load_config(inv.config_path);
    if (inv.seed) {
      config.sim.seed = *inv.seed;
      config.has_seed = true;
    }
    const detail::Context c{inv, std::move(config), out, err};
    detail::check_parameters(c);
    if (inv.command == "solve") return detail::cmd_solve(c);
    if (inv.command == "simulate") return detail::cmd_simulate(c);
    if (inv.command == "evaluate") return detail::cmd_evaluate(c);
    if (inv.command == "oracle") return detail::cmd_oracle(c);
    if (inv.command == "verify") return detail::cmd_verify(c);
    if (inv.command == "sweep") return detail::cmd_sweep(c);
    throw ConfigError("unknown command '" + inv.command + "'");
  } catch (const TechnicalConditionViolated& e) {
    err << "error: " << e.what() << '\n';
    for (std::size_t i = 0; i < e.points().size() && i < 10; ++i)
      err << "  C = " << format_double(e.margins()[i]) << " at grid point " << e.points()[i] << '\n';
    err << "  (--clamp-zero sets the risk control to zero there and flags the result non-optimal)\n";
    return precondition;
  } catch (const PreconditionError& e) {
    err << "error: " << e.what() << '\n';
    return precondition;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << '\n';
    return precondition;
  } catch (const SimulationError& e) {
    err << "error: " << e.what() << '\n';
    return precondition;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return io_error;
  }
}

}  // namespace insurer::cli
