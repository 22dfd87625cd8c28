#pragma once

#include <stdexcept>
#include <string>

namespace egpd {

// Each error family maps to one CLI exit code (see tools/egpd_lasso_cli.cpp).

/// Invalid configuration or argument values (exit code 2).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed or out-of-domain input data (exit code 3).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numerical failure during fitting or post-processing (exit code 4).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of a distribution routine.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Linear predictors map to a parameter outside the admissible region
/// (e.g. xi <= -1/2 under the identity link).
class InvalidRegionError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

}  // namespace egpd
