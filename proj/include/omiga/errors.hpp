#pragma once

#include <stdexcept>
#include <string>

namespace omiga {

// Validation failures (bad input, bad config, bad file) exit the CLI with 1;
// numeric failures (divergence, non-finite losses) exit with 2.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class ParamError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class UsageError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class IoError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class ParseError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class IntegrityError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class VersionError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class CompatibilityError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class PreconditionError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Learned policy places mass where the behavior policy has none.
class DivergentKlError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConvergenceError : public NumericError {
 public:
  using NumericError::NumericError;
};

}  // namespace omiga
