#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "insurer/evaluation.hpp"
#include "insurer/model.hpp"
#include "insurer/noise.hpp"
#include "insurer/solvers.hpp"
#include "insurer/utility.hpp"

namespace insurer {

using Json = nlohmann::ordered_json;

/// Malformed or missing configuration; the CLI maps it to exit code 1.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Number formatting
// ---------------------------------------------------------------------------

/// %.17g, which round-trips every double. Non-finite values are spelled out.
inline std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

namespace detail {

inline void write_json(std::string& out, const Json& j, int indent, int depth) {
  const auto newline = [&](int d) {
    out += '\n';
    out.append(static_cast<std::size_t>(indent * d), ' ');
  };
  switch (j.type()) {
    case Json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += '{';
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out += ',';
        first = false;
        newline(depth + 1);
        out += Json(it.key()).dump();
        out += ": ";
        write_json(out, it.value(), indent, depth + 1);
      }
      newline(depth);
      out += '}';
      return;
    }
    case Json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      out += '[';
      bool first = true;
      for (const auto& v : j) {
        if (!first) out += ',';
        first = false;
        newline(depth + 1);
        write_json(out, v, indent, depth + 1);
      }
      newline(depth);
      out += ']';
      return;
    }
    case Json::value_t::number_float: {
      const double x = j.get<double>();
      out += std::isfinite(x) ? format_double(x) : "null";
      return;
    }
    default:
      out += j.dump();
  }
}

}  // namespace detail

/// Pretty-printed JSON with every float at 17 significant digits.
inline std::string to_json_text(const Json& j) {
  std::string out;
  detail::write_json(out, j, 2, 0);
  out += '\n';
  return out;
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct OracleConfig {
  OracleOptions options;
  /// Spacing of the optional (pi, kappa, f) surface dump; 0 disables it.
  double surface_spacing = 0.0;
};

struct SweepConfig {
  std::string param;
  std::vector<double> values;
};

struct RunConfig {
  MarketCoefficients market;
  RiskParams risk{};
  UtilitySpec utility;
  SimConfig sim;
  bool has_seed = false;
  /// Control simulated by `simulate`; the optimal strategy when empty.
  std::optional<Challenger> control;
  std::vector<Challenger> challengers = default_challengers();
  std::vector<Challenger> constancy = constancy_panel();
  std::vector<std::size_t> ladder;
  OracleConfig oracle;
  std::optional<SweepConfig> sweep;
};

namespace detail {

inline const Json& require(const Json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) throw ConfigError(where + ": missing key '" + key + "'");
  return j.at(key);
}

inline double number(const Json& j, const std::string& where) {
  if (!j.is_number()) throw ConfigError(where + ": expected a number");
  return j.get<double>();
}

inline double number_or(const Json& parent, const char* key, double fallback,
                        const std::string& where) {
  if (!parent.contains(key)) return fallback;
  return number(parent.at(key), where + "." + key);
}

inline std::size_t count_or(const Json& parent, const char* key, std::size_t fallback,
                            const std::string& where) {
  if (!parent.contains(key)) return fallback;
  const Json& v = parent.at(key);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
    throw ConfigError(where + "." + key + ": expected a non-negative integer");
  return v.get<std::size_t>();
}

/// A scalar, broadcast to n entries, or an array of exactly n entries.
inline std::vector<double> grid_values(const Json& j, std::size_t n, const std::string& where) {
  if (j.is_number()) return std::vector<double>(n, j.get<double>());
  if (!j.is_array()) throw ConfigError(where + ": expected a number or an array");
  if (j.size() != n)
    throw ConfigError(where + ": array has " + std::to_string(j.size()) + " entries, n_grid is " +
                      std::to_string(n));
  std::vector<double> out;
  for (const Json& v : j) out.push_back(number(v, where));
  return out;
}

inline std::pair<double, double> number_pair(const Json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 2) throw ConfigError(where + ": expected [a, b]");
  return {number(j[0], where), number(j[1], where)};
}

inline Challenger parse_challenger(const Json& j, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  Challenger c;
  c.label = j.contains("label") ? j.at("label").get<std::string>() : std::string("control");
  c.pi_scale = number_or(j, "pi_scale", 1.0, where);
  c.risk_scale = number_or(j, "risk_scale", 1.0, where);
  if (j.contains("constant")) c.constant = number_pair(j.at("constant"), where + ".constant");
  return c;
}

inline std::vector<Challenger> parse_challengers(const Json& j, const std::string& where) {
  if (!j.is_array()) throw ConfigError(where + ": expected an array");
  std::vector<Challenger> out;
  for (std::size_t i = 0; i < j.size(); ++i)
    out.push_back(parse_challenger(j[i], where + "[" + std::to_string(i) + "]"));
  return out;
}

inline UtilitySpec parse_utility(const Json& j) {
  const std::string kind = require(j, "kind", "utility").get<std::string>();
  if (kind == "log") return LogUtility{};
  if (kind != "power" && kind != "exponential" && kind != "quadratic")
    throw ConfigError("utility.kind: unknown kind '" + kind + "' (log, power, exponential, quadratic)");
  const double alpha = number(require(j, "alpha", "utility"), "utility.alpha");
  try {
    UtilitySpec u;
    if (kind == "power") u = make_power_utility(alpha, number_or(j, "c", 0.0, "utility"));
    else if (kind == "exponential") u = ExponentialUtility{alpha};
    else u = QuadraticUtility{alpha};
    check_utility(u);
    return u;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("utility: ") + e.what());
  }
}

}  // namespace detail

inline RunConfig parse_config(const Json& j) {
  using namespace detail;
  if (!j.is_object()) throw ConfigError("config: top level must be an object");
  RunConfig c;
  try {
    const Json& m = require(j, "market", "config");
    const double T = number(require(m, "T", "market"), "market.T");
    const std::size_t n = count_or(m, "n_grid", 1, "market");
    if (n == 0) throw ConfigError("market.n_grid must be >= 1");
    if (!(T > 0.0)) throw ConfigError("market.T must be > 0");
    c.market = MarketCoefficients(GridFunction(grid_values(require(m, "r", "market"), n, "market.r"), T),
                                  GridFunction(grid_values(require(m, "mu", "market"), n, "market.mu"), T),
                                  GridFunction(grid_values(require(m, "sigma", "market"), n, "market.sigma"), T));

    const Json& k = require(j, "risk", "config");
    c.risk = {number(require(k, "p", "risk"), "risk.p"),
              number(require(k, "a", "risk"), "risk.a"),
              number(require(k, "b", "risk"), "risk.b"),
              number(require(k, "gamma", "risk"), "risk.gamma"),
              number(require(k, "lambda", "risk"), "risk.lambda"),
              number(require(k, "rho", "risk"), "risk.rho")};

    c.utility = parse_utility(require(j, "utility", "config"));

    const Json empty = Json::object();
    const Json& s = j.contains("simulation") ? j.at("simulation") : empty;
    c.sim.x0 = number_or(s, "x0", 1.0, "simulation");
    c.sim.horizon = T;
    c.sim.n_steps = count_or(s, "n_steps", 256, "simulation");
    c.sim.n_paths = count_or(s, "n_paths", 10000, "simulation");
    if (s.contains("seed")) {
      if (!s.at("seed").is_number_unsigned() && !s.at("seed").is_number_integer())
        throw ConfigError("simulation.seed: expected an unsigned integer");
      c.sim.seed = s.at("seed").get<std::uint64_t>();
      c.has_seed = true;
    }
    if (s.contains("control")) c.control = parse_challenger(s.at("control"), "simulation.control");

    if (j.contains("challengers")) c.challengers = parse_challengers(j.at("challengers"), "challengers");
    if (j.contains("constancy_panel"))
      c.constancy = parse_challengers(j.at("constancy_panel"), "constancy_panel");
    if (j.contains("ladder")) {
      const Json& ladder = j.at("ladder");
      if (!ladder.is_array()) throw ConfigError("ladder: expected an array of step counts");
      for (const Json& v : ladder) {
        if (!v.is_number_integer() || v.get<std::int64_t>() < 1)
          throw ConfigError("ladder: expected positive integers");
        c.ladder.push_back(v.get<std::size_t>());
      }
    }

    if (j.contains("oracle")) {
      const Json& o = j.at("oracle");
      OracleOptions& opt = c.oracle.options;
      if (o.contains("pi_range")) std::tie(opt.pi_lo, opt.pi_hi) = number_pair(o.at("pi_range"), "oracle.pi_range");
      if (o.contains("kappa_range"))
        std::tie(opt.kappa_lo, opt.kappa_hi) = number_pair(o.at("kappa_range"), "oracle.kappa_range");
      opt.spacing = number_or(o, "spacing", opt.spacing, "oracle");
      opt.refinements = static_cast<int>(count_or(o, "refinements", 2, "oracle"));
      opt.grid_index = count_or(o, "grid_index", 0, "oracle");
      c.oracle.surface_spacing = number_or(o, "surface_spacing", 0.0, "oracle");
    }

    if (j.contains("sweep")) {
      const Json& w = j.at("sweep");
      SweepConfig sw;
      sw.param = require(w, "param", "sweep").get<std::string>();
      if (w.contains("values")) {
        for (const Json& v : w.at("values")) sw.values.push_back(number(v, "sweep.values"));
      } else {
        const double from = number(require(w, "from", "sweep"), "sweep.from");
        const double to = number(require(w, "to", "sweep"), "sweep.to");
        const double step = number(require(w, "step", "sweep"), "sweep.step");
        if (!(step > 0.0) || to < from) throw ConfigError("sweep: need step > 0 and to >= from");
        const auto count = static_cast<std::size_t>(std::floor((to - from) / step + 1e-9));
        const double last = from + static_cast<double>(count) * step;
        for (std::size_t i = 0; i <= count; ++i)
          sw.values.push_back(count == 0 ? from : std::lerp(from, last, static_cast<double>(i) / static_cast<double>(count)));
      }
      if (sw.values.empty()) throw ConfigError("sweep: no values");
      c.sweep = std::move(sw);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return c;
}

inline Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("'" + path + "' is not valid JSON: " + e.what());
  }
}

inline RunConfig load_config(const std::string& path) { return parse_config(read_json_file(path)); }

/// Replaces one named scalar; market names become constant grids.
inline void set_parameter(RunConfig& c, const std::string& name, double value) {
  RiskParams& k = c.risk;
  if (name == "p") k.p = value;
  else if (name == "a") k.a = value;
  else if (name == "b") k.b = value;
  else if (name == "gamma") k.gamma = value;
  else if (name == "lambda") k.lambda = value;
  else if (name == "rho") k.rho = value;
  else if (name == "r" || name == "mu" || name == "sigma") {
    const std::size_t n = c.market.grid_size();
    const double T = c.market.horizon();
    auto grid = [&](const GridFunction& g, bool replace) {
      return replace ? GridFunction::constant(value, T, n) : g;
    };
    c.market = MarketCoefficients(grid(c.market.r(), name == "r"), grid(c.market.mu(), name == "mu"),
                                  grid(c.market.sigma(), name == "sigma"));
  } else {
    throw ConfigError("sweep: unknown parameter '" + name + "'");
  }
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

inline Json to_json(const MCEstimate& e) {
  return Json{{"mean", e.mean},          {"stderr", e.std_error},
              {"n", e.n},                {"level", e.confidence.level},
              {"ci_lower", e.lower()},   {"ci_upper", e.upper()}};
}

inline Json to_json(const ConditionMargin& m, const std::vector<double>& times) {
  Json values = Json::array();
  for (std::size_t j = 0; j < m.margin.size(); ++j) values.push_back(Json{{"t", times[j]}, {"C", m.margin[j]}});
  return Json{{"min", m.min}, {"t_argmin", m.t_argmin}, {"holds", m.holds()}, {"values", values}};
}

/// Largest kernel matching residual over the grid points that were not clamped.
inline double kernel_residual_max(const StrategySolution& s) {
  const MeasureChangeKernel k = compute_kernels(s, std::numeric_limits<double>::infinity());
  double m = 0.0;
  for (std::size_t j = 0; j < s.times.size(); ++j) {
    if (s.is_clamped(j)) continue;
    m = std::max({m, std::abs(k.investment_residual[j]), std::abs(k.liability_residual[j])});
  }
  return m;
}

inline Json utility_json(const UtilitySpec& u) {
  Json j{{"kind", std::string(utility_name(u))}};
  if (!std::holds_alternative<LogUtility>(u)) j["alpha"] = utility_alpha(u);
  if (const auto* p = std::get_if<PowerNegativeUtility>(&u)) j["c"] = p->c;
  return j;
}

inline Json solve_report(const StrategySolution& s) {
  Json controls = Json::array();
  for (std::size_t j = 0; j < s.times.size(); ++j) {
    Json c{{"t", s.times[j]}};
    if (s.kind == ControlKind::fractional) {
      c["pi"] = s.pi[j];
      c["kappa"] = s.kappa[j];
      if (!s.phi.empty()) c["phi"] = s.phi[j];
    } else {
      c["pi_tilde"] = s.pi_tilde[j];
      c["L"] = s.L[j];
    }
    controls.push_back(std::move(c));
  }
  Json report{{"utility", utility_json(s.utility)},
              {"condition_margins", to_json(s.margin, s.times)},
              {"controls", controls}};
  if (s.quadratic) {
    const QuadraticIngredients& q = *s.quadratic;
    Json phi = Json::array();
    for (double v : q.Phi.values()) phi.push_back(v);
    report["feedback"] = Json{{"controls_per_unit_z", true},
                              {"x0", q.x0},
                              {"Z0", q.Z0},
                              {"P_T", q.P_T()},
                              {"Phi", phi}};
  }
  report["diagnostics"] = Json{{"foc_residual_max", s.foc_residual_max()},
                               {"kernel_residual_max", kernel_residual_max(s)},
                               {"iterations", s.total_iterations()}};
  report["non_optimal"] = s.non_optimal;
  if (s.non_optimal) {
    Json pts = Json::array();
    for (std::size_t j : s.clamped_points) pts.push_back(s.times[j]);
    report["clamped_times"] = pts;
  }
  return report;
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& out) : out_(out) {}

  void header(std::initializer_list<const char*> cols) {
    bool first = true;
    for (const char* c : cols) {
      if (!first) out_ << ',';
      out_ << c;
      first = false;
    }
    out_ << '\n';
  }

  CsvWriter& cell(double x) { return raw(format_double(x)); }
  CsvWriter& cell(std::size_t x) { return raw(std::to_string(x)); }
  CsvWriter& cell(int x) { return raw(std::to_string(x)); }
  CsvWriter& cell(const std::string& x) { return raw(x); }

  void end_row() {
    out_ << '\n';
    first_ = true;
  }

 private:
  CsvWriter& raw(const std::string& s) {
    if (!first_) out_ << ',';
    out_ << s;
    first_ = false;
    return *this;
  }

  std::ostream& out_;
  bool first_ = true;
};

}  // namespace insurer
