#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace insurer {

/// Piecewise-constant function on a uniform partition of [0, T].
/// Segment j covers [j*T/n, (j+1)*T/n); the last segment also owns T.
class GridFunction {
 public:
  GridFunction() = default;

  GridFunction(std::vector<double> values, double horizon)
      : values_(std::move(values)), horizon_(horizon) {
    if (values_.empty()) throw std::invalid_argument("GridFunction: empty grid");
    if (!(horizon_ > 0.0) || !std::isfinite(horizon_))
      throw std::invalid_argument("GridFunction: horizon must be positive");
  }

  static GridFunction constant(double value, double horizon, std::size_t n = 1) {
    return GridFunction(std::vector<double>(n, value), horizon);
  }

  std::size_t size() const noexcept { return values_.size(); }
  double horizon() const noexcept { return horizon_; }
  double step() const noexcept { return horizon_ / static_cast<double>(values_.size()); }
  double segment_start(std::size_t j) const noexcept {
    return horizon_ * static_cast<double>(j) / static_cast<double>(values_.size());
  }

  double operator[](std::size_t j) const { return values_[j]; }
  const std::vector<double>& values() const noexcept { return values_; }

  std::size_t index_at(double t) const noexcept {
    if (t <= 0.0) return 0;
    auto j = static_cast<std::size_t>(std::floor(t / horizon_ * static_cast<double>(size())));
    return std::min(j, size() - 1);
  }

  double at(double t) const noexcept { return values_[index_at(t)]; }

  /// Exact integral over [lo, hi] (clipped to [0, T]).
  double integral(double lo, double hi) const noexcept {
    lo = std::clamp(lo, 0.0, horizon_);
    hi = std::clamp(hi, 0.0, horizon_);
    if (hi <= lo) return 0.0;
    double sum = 0.0;
    for (std::size_t j = index_at(lo); j < size(); ++j) {
      const double a = std::max(lo, segment_start(j));
      const double b = std::min(hi, j + 1 == size() ? horizon_ : segment_start(j + 1));
      if (a >= hi) break;
      if (b > a) sum += values_[j] * (b - a);
    }
    return sum;
  }

  double min() const { return *std::min_element(values_.begin(), values_.end()); }
  double max() const { return *std::max_element(values_.begin(), values_.end()); }

 private:
  std::vector<double> values_;
  double horizon_ = 1.0;
};

}  // namespace insurer
