#pragma once

#include <stdexcept>
#include <string>

namespace popadj {

/// Invalid configuration or input data (maps to CLI exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numerical estimation failure (maps to CLI exit code 4).
class EstimationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Logistic fit diverged: some |coefficient| exceeded the separation threshold.
class SeparationError : public EstimationError {
 public:
  using EstimationError::EstimationError;
};

/// No MAIC weights balance the target moments (target outside the convex hull
/// of the observed effect modifiers). Maps to CLI exit code 3.
class InfeasibleError : public EstimationError {
 public:
  using EstimationError::EstimationError;
};

}  // namespace popadj
