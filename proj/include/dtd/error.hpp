#pragma once

#include <stdexcept>
#include <string>

namespace dtd {

/// Base of every error raised by the library. `exit_code()` is the CLI mapping.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const noexcept { return 1; }
};

/// Bad shapes, out-of-range parameters, malformed configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 2; }
};

/// A modelling assumption (ergodicity, bounded rewards, consensus weights,
/// feature rank) does not hold for the given input.
class AssumptionViolation : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 2; }
};

/// Random instance generation failed after the retry budget.
class GenerationError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 2; }
};

/// Ill-conditioned linear algebra.
class NumericalError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 3; }
};

/// Non-finite parameters during a learning run.
class DivergenceError : public NumericalError {
 public:
  DivergenceError(const std::string& what, std::size_t round, std::size_t step)
      : NumericalError(what + " (round " + std::to_string(round) + ", step " +
                       std::to_string(step) + ")"),
        round_(round),
        step_(step) {}

  std::size_t round() const noexcept { return round_; }
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t round_;
  std::size_t step_;
};

class IoError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 4; }
};

}  // namespace dtd
