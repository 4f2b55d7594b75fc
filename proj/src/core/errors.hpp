#pragma once

#include <stdexcept>
#include <string>

namespace omnitrack {

/// Thrown when a symmetric matrix that must be positive definite is not.
/// Callers that own a covariance react by resetting it (see repair_covariance).
class NotPositiveDefinite : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class SingularMatrix : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidTrajectoryId : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace omnitrack
