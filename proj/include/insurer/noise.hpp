#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "insurer/model.hpp"
#include "insurer/parallel.hpp"
#include "insurer/rng.hpp"

namespace insurer {

struct SimConfig {
  double x0 = 1.0;
  double horizon = 1.0;
  std::size_t n_steps = 1;
  std::size_t n_paths = 1;
  std::uint64_t seed = 0;

  double dt() const noexcept { return horizon / static_cast<double>(n_steps); }

  void validate() const {
    if (!(x0 > 0.0) || !std::isfinite(x0)) throw std::invalid_argument("SimConfig: x0 must be > 0");
    if (!(horizon > 0.0) || !std::isfinite(horizon))
      throw std::invalid_argument("SimConfig: horizon must be > 0");
    if (n_steps < 1) throw std::invalid_argument("SimConfig: n_steps must be >= 1");
    if (n_paths < 1) throw std::invalid_argument("SimConfig: n_paths must be >= 1");
  }
};

/// Increments of (W1, W2, N) over the steps of one path.
struct PathNoise {
  double dt = 0.0;
  std::vector<double> dW1;
  std::vector<double> dW2;
  std::vector<int> dN;

  std::size_t steps() const noexcept { return dW1.size(); }

  int jumps() const noexcept {
    int n = 0;
    for (int k : dN) n += k;
    return n;
  }
};

/// rho dW1 + sqrt(1 - rho^2) dW2
inline double liability_brownian_increment(double rho, double dW1, double dW2) noexcept {
  return rho * dW1 + std::sqrt(1.0 - rho * rho) * dW2;
}

/// Noise of path `path`; a pure function of (seed, path, n_steps, dt, lambda).
inline PathNoise generate_path_noise(std::uint64_t seed, std::uint64_t path, std::size_t n_steps,
                                     double dt, double lambda) {
  PathNoise out;
  out.dt = dt;
  out.dW1.resize(n_steps);
  out.dW2.resize(n_steps);
  out.dN.resize(n_steps);
  const PathStream stream(seed, path);
  const double scale = std::sqrt(dt);
  const double mean_jumps = lambda * dt;
  for (std::size_t k = 0; k < n_steps; ++k) {
    const auto u = stream.uniforms(k);
    const auto z = box_muller(u[0], u[1]);
    out.dW1[k] = scale * z[0];
    out.dW2[k] = scale * z[1];
    out.dN[k] = poisson_inversion(mean_jumps, u[2]);
  }
  return out;
}

/// Sums consecutive groups of `factor` steps; the coarse path sees the same noise.
inline PathNoise aggregate(const PathNoise& fine, std::size_t factor) {
  if (factor == 0 || fine.steps() % factor != 0)
    throw std::invalid_argument("aggregate: factor must divide the number of steps");
  PathNoise out;
  out.dt = fine.dt * static_cast<double>(factor);
  const std::size_t n = fine.steps() / factor;
  out.dW1.assign(n, 0.0);
  out.dW2.assign(n, 0.0);
  out.dN.assign(n, 0);
  for (std::size_t k = 0; k < fine.steps(); ++k) {
    out.dW1[k / factor] += fine.dW1[k];
    out.dW2[k / factor] += fine.dW2[k];
    out.dN[k / factor] += fine.dN[k];
  }
  return out;
}

/// Noise for a whole ensemble, stored path-major.
struct NoiseIncrements {
  std::size_t n_paths = 0;
  std::size_t n_steps = 0;
  double dt = 0.0;
  double rho = 0.0;
  double lambda = 0.0;
  std::vector<double> dW1;
  std::vector<double> dW2;
  std::vector<int> dN;

  std::size_t index(std::size_t path, std::size_t step) const noexcept {
    return path * n_steps + step;
  }
  double dW_bar(std::size_t path, std::size_t step) const noexcept {
    const std::size_t i = index(path, step);
    return liability_brownian_increment(rho, dW1[i], dW2[i]);
  }
  /// Compensated Poisson increment dN - lambda dt.
  double dM(std::size_t path, std::size_t step) const noexcept {
    return dN[index(path, step)] - lambda * dt;
  }

  PathNoise path(std::size_t i) const {
    PathNoise p;
    p.dt = dt;
    const auto b = static_cast<std::ptrdiff_t>(i * n_steps);
    const auto e = b + static_cast<std::ptrdiff_t>(n_steps);
    p.dW1.assign(dW1.begin() + b, dW1.begin() + e);
    p.dW2.assign(dW2.begin() + b, dW2.begin() + e);
    p.dN.assign(dN.begin() + b, dN.begin() + e);
    return p;
  }
};

inline NoiseIncrements generate_noise(const SimConfig& config, const RiskParams& risk,
                                      unsigned threads = 1) {
  config.validate();
  NoiseIncrements out;
  out.n_paths = config.n_paths;
  out.n_steps = config.n_steps;
  out.dt = config.dt();
  out.rho = risk.rho;
  out.lambda = risk.lambda;
  const std::size_t total = config.n_paths * config.n_steps;
  out.dW1.resize(total);
  out.dW2.resize(total);
  out.dN.resize(total);
  parallel_for(config.n_paths, threads, [&](std::size_t i) {
    const PathNoise p = generate_path_noise(config.seed, i, config.n_steps, out.dt, risk.lambda);
    for (std::size_t k = 0; k < config.n_steps; ++k) {
      out.dW1[out.index(i, k)] = p.dW1[k];
      out.dW2[out.index(i, k)] = p.dW2[k];
      out.dN[out.index(i, k)] = p.dN[k];
    }
  });
  return out;
}

}  // namespace insurer
