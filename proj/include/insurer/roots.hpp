#pragma once

#include <cmath>
#include <string>

#include "insurer/errors.hpp"

namespace insurer {

struct RootResult {
  double root;
  double residual;
  int iterations;
};

/// Bisection on a sign-changing bracket [lo, hi].
///
/// Stops once the bracket is narrower than `x_tol` and the better endpoint has
/// |f| <= `f_tol`, or when the bracket can no longer be split in double
/// precision. Throws BracketFailure when f(lo) and f(hi) share a strict sign.
template <class F>
RootResult bisect(F&& f, double lo, double hi, double x_tol = 1e-12, double f_tol = 0.0,
                  int max_iterations = 200) {
  double f_lo = f(lo);
  double f_hi = f(hi);
  if (f_lo == 0.0) return {lo, 0.0, 0};
  if (f_hi == 0.0) return {hi, 0.0, 0};
  if (std::signbit(f_lo) == std::signbit(f_hi))
    throw BracketFailure("bisect: no sign change on [" + std::to_string(lo) + ", " +
                         std::to_string(hi) + "]");

  int it = 0;
  auto best = [&]() -> RootResult {
    return std::abs(f_lo) <= std::abs(f_hi) ? RootResult{lo, f_lo, it} : RootResult{hi, f_hi, it};
  };
  while (it < max_iterations) {
    const RootResult b = best();
    if (hi - lo <= x_tol && std::abs(b.residual) <= f_tol) return b;
    const double mid = lo + 0.5 * (hi - lo);
    if (!(mid > lo && mid < hi)) return b;
    const double f_mid = f(mid);
    ++it;
    if (f_mid == 0.0) return {mid, 0.0, it};
    if (std::signbit(f_mid) == std::signbit(f_lo)) {
      lo = mid;
      f_lo = f_mid;
    } else {
      hi = mid;
      f_hi = f_mid;
    }
  }
  return best();
}

}  // namespace insurer
