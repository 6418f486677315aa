#pragma once

#include <stdexcept>
#include <string>

namespace losscost {

/// Bad input: malformed model, violated precondition, inapplicable method.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// The state space would exceed the configured cap.
class SizeError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// A computation could not deliver a trustworthy number (overflow,
/// ill-conditioning, residual above tolerance, non-convergence).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace losscost
