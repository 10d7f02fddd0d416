#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>

namespace insurer {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
/// Output is a pure function of (counter, key).
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static constexpr Counter block(Counter ctr, Key key) noexcept {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += kW0;
        key[1] += kW1;
      }
      const std::uint64_t p0 = std::uint64_t{kM0} * ctr[0];
      const std::uint64_t p1 = std::uint64_t{kM1} * ctr[2];
      ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0], static_cast<std::uint32_t>(p1),
             static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1], static_cast<std::uint32_t>(p0)};
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kM0 = 0xD2511F53;
  static constexpr std::uint32_t kM1 = 0xCD9E8D57;
  static constexpr std::uint32_t kW0 = 0x9E3779B9;
  static constexpr std::uint32_t kW1 = 0xBB67AE85;
};

/// Uniform in [0, 1) with 53 random bits.
inline double to_unit_interval(std::uint32_t hi, std::uint32_t lo) noexcept {
  const std::uint64_t bits = (std::uint64_t{hi} << 32) | lo;
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

/// Random access stream for one simulated path: draw (step, lane) is a pure
/// function of (seed, path, step, lane).
class PathStream {
 public:
  PathStream(std::uint64_t seed, std::uint64_t path) noexcept
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        path_(path) {}

  /// Four uniforms in [0, 1) for step `step`.
  std::array<double, 4> uniforms(std::uint64_t step) const noexcept {
    std::array<double, 4> out{};
    for (std::uint64_t lane = 0; lane < 2; ++lane) {
      const std::uint64_t c = step * 2 + lane;
      const auto r = Philox4x32::block({static_cast<std::uint32_t>(c),
                                        static_cast<std::uint32_t>(c >> 32),
                                        static_cast<std::uint32_t>(path_),
                                        static_cast<std::uint32_t>(path_ >> 32)},
                                       key_);
      out[2 * lane] = to_unit_interval(r[0], r[1]);
      out[2 * lane + 1] = to_unit_interval(r[2], r[3]);
    }
    return out;
  }

 private:
  Philox4x32::Key key_;
  std::uint64_t path_;
};

/// Box-Muller pair of independent standard normals from two uniforms in [0, 1).
inline std::array<double, 2> box_muller(double u1, double u2) noexcept {
  const double radius = std::sqrt(-2.0 * std::log(1.0 - u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  return {radius * std::cos(angle), radius * std::sin(angle)};
}

/// Poisson(mean) by inversion with a cumulative search from k = 0.
inline int poisson_inversion(double mean, double u) {
  if (mean == 0.0) return 0;
  if (!(mean > 0.0) || !(mean < 700.0))
    throw std::invalid_argument("poisson_inversion: mean must be in [0, 700)");
  int k = 0;
  double p = std::exp(-mean);
  double cdf = p;
  while (u >= cdf) {
    ++k;
    p *= mean / k;
    if (p == 0.0 && k > mean) break;
    cdf += p;
  }
  return k;
}

}  // namespace insurer
