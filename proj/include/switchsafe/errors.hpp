#pragma once

#include <stdexcept>
#include <string>

namespace switchsafe {

/// Cholesky or matrix square root failed even after jitter escalation.
class NumericalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A state fell outside the operating box, or no region claims it.
class DomainError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Malformed or unknown configuration keys.
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Trajectory timestamps are not uniformly spaced.
class TrajectoryError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Every hyperparameter restart failed.
class OptimizationError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

} // namespace switchsafe
