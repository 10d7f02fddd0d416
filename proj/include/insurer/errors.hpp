#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace insurer {

/// Argument outside the domain of a utility, objective or control.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Base for violations of the mathematical preconditions of a solver.
/// The CLI maps every subclass to exit code 2.
class PreconditionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// min_t C(t) <= 0. Carries the offending grid points and their margins.
class TechnicalConditionViolated : public PreconditionError {
 public:
  TechnicalConditionViolated(std::string what, std::vector<std::size_t> points,
                             std::vector<double> margins)
      : PreconditionError(std::move(what)),
        points_(std::move(points)),
        margins_(std::move(margins)) {}

  const std::vector<std::size_t>& points() const noexcept { return points_; }
  const std::vector<double>& margins() const noexcept { return margins_; }

 private:
  std::vector<std::size_t> points_;
  std::vector<double> margins_;
};

class BracketFailure : public PreconditionError {
 public:
  using PreconditionError::PreconditionError;
};

class PhiNegative : public PreconditionError {
 public:
  PhiNegative(std::string what, std::vector<std::size_t> points)
      : PreconditionError(std::move(what)), points_(std::move(points)) {}

  const std::vector<std::size_t>& points() const noexcept { return points_; }

 private:
  std::vector<std::size_t> points_;
};

class BlissPointExceeded : public PreconditionError {
 public:
  using PreconditionError::PreconditionError;
};

class AdmissibilityError : public PreconditionError {
 public:
  using PreconditionError::PreconditionError;
};

/// A kernel matching equation failed: signals a solver bug, not bad input.
class KernelResidualTooLarge : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// NaN or overflow in a simulated path.
class SimulationError : public std::runtime_error {
 public:
  SimulationError(const std::string& what, std::size_t path, std::size_t step)
      : std::runtime_error(what + " (path " + std::to_string(path) + ", step " +
                           std::to_string(step) + ")"),
        path_(path),
        step_(step) {}

  std::size_t path() const noexcept { return path_; }
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t path_;
  std::size_t step_;
};

}  // namespace insurer
