#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <string_view>
#include <type_traits>
#include <variant>

#include "insurer/errors.hpp"

namespace insurer {

struct LogUtility {};

/// U(x) = x^alpha, 0 < alpha < 1.
struct PowerUtility {
  double alpha;
};

/// U(x) = c - x^alpha, alpha < 0. The shift c never reaches the optimizer.
struct PowerNegativeUtility {
  double alpha;
  double c = 0.0;
};

/// U(x) = -exp(-alpha x) / alpha, alpha > 0.
struct ExponentialUtility {
  double alpha;
};

/// U(x) = x - alpha x^2 / 2, alpha > 0. Bliss point at 1/alpha.
struct QuadraticUtility {
  double alpha;
};

using UtilitySpec = std::variant<LogUtility, PowerUtility, PowerNegativeUtility,
                                 ExponentialUtility, QuadraticUtility>;

inline UtilitySpec make_power_utility(double alpha, double c = 0.0) {
  if (alpha > 0.0 && alpha < 1.0) return PowerUtility{alpha};
  if (alpha < 0.0) return PowerNegativeUtility{alpha, c};
  throw std::invalid_argument("power utility requires alpha in (0,1) or alpha < 0");
}

inline void check_utility(const UtilitySpec& u) {
  std::visit(
      [](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, PowerUtility>) {
          if (!(s.alpha > 0.0 && s.alpha < 1.0))
            throw std::invalid_argument("power utility requires alpha in (0,1)");
        } else if constexpr (std::is_same_v<T, PowerNegativeUtility>) {
          if (!(s.alpha < 0.0)) throw std::invalid_argument("negative power utility requires alpha < 0");
        } else if constexpr (std::is_same_v<T, ExponentialUtility> ||
                             std::is_same_v<T, QuadraticUtility>) {
          if (!(s.alpha > 0.0)) throw std::invalid_argument("utility requires alpha > 0");
        }
      },
      u);
}

inline std::string_view utility_name(const UtilitySpec& u) {
  constexpr std::string_view names[] = {"log", "power", "power_negative", "exponential",
                                        "quadratic"};
  return names[u.index()];
}

/// Risk-aversion parameter; zero for log.
inline double utility_alpha(const UtilitySpec& u) {
  return std::visit(
      [](const auto& s) -> double {
        if constexpr (std::is_same_v<std::decay_t<decltype(s)>, LogUtility>)
          return 0.0;
        else
          return s.alpha;
      },
      u);
}

/// Log and power utilities are optimised over fractions (pi, kappa); exponential
/// and quadratic over dollar amounts (pi_tilde, L).
inline bool uses_fractional_controls(const UtilitySpec& u) {
  return std::holds_alternative<LogUtility>(u) || std::holds_alternative<PowerUtility>(u) ||
         std::holds_alternative<PowerNegativeUtility>(u);
}

inline double utility(const UtilitySpec& u, double x) {
  return std::visit(
      [x](const auto& s) -> double {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, LogUtility>) {
          if (!(x > 0.0)) throw DomainError("log utility requires x > 0");
          return std::log(x);
        } else if constexpr (std::is_same_v<T, PowerUtility>) {
          if (!(x > 0.0)) throw DomainError("power utility requires x > 0");
          return std::pow(x, s.alpha);
        } else if constexpr (std::is_same_v<T, PowerNegativeUtility>) {
          if (!(x > 0.0)) throw DomainError("power utility requires x > 0");
          return s.c - std::pow(x, s.alpha);
        } else if constexpr (std::is_same_v<T, ExponentialUtility>) {
          return -std::exp(-s.alpha * x) / s.alpha;
        } else {
          return x - 0.5 * s.alpha * x * x;
        }
      },
      u);
}

inline double marginal_utility(const UtilitySpec& u, double x) {
  return std::visit(
      [x](const auto& s) -> double {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, LogUtility>) {
          if (!(x > 0.0)) throw DomainError("log utility requires x > 0");
          return 1.0 / x;
        } else if constexpr (std::is_same_v<T, PowerUtility>) {
          if (!(x > 0.0)) throw DomainError("power utility requires x > 0");
          return s.alpha * std::pow(x, s.alpha - 1.0);
        } else if constexpr (std::is_same_v<T, PowerNegativeUtility>) {
          if (!(x > 0.0)) throw DomainError("power utility requires x > 0");
          return -s.alpha * std::pow(x, s.alpha - 1.0);
        } else if constexpr (std::is_same_v<T, ExponentialUtility>) {
          return std::exp(-s.alpha * x);
        } else {
          return 1.0 - s.alpha * x;
        }
      },
      u);
}

/// Whether x lies in the domain of U.
inline bool in_domain(const UtilitySpec& u, double x) noexcept {
  return !uses_fractional_controls(u) || x > 0.0;
}

/// U'(x) * y. For log utility this is evaluated as y / x, so y == x gives exactly 1.
inline double marginal_utility_times(const UtilitySpec& u, double x, double y) {
  if (std::holds_alternative<LogUtility>(u)) {
    if (!(x > 0.0)) throw DomainError("log utility requires x > 0");
    return y / x;
  }
  return marginal_utility(u, x) * y;
}

}  // namespace insurer
