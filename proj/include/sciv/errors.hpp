#ifndef SCIV_ERRORS_HPP
#define SCIV_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace sciv {

// Root of every exception thrown by the library. The C API maps the three
// families below onto its status codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad user input: malformed config, invalid parameters, unwritable paths.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// A quantity requested outside the region where it is defined.
class DomainError : public Error {
 public:
  using Error::Error;
};

class UnboundMotionError : public DomainError {
 public:
  using DomainError::DomainError;
};

// Numerical breakdown: overflow guards, branch ambiguities, grid coverage.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class OutOfRangeError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class BranchAmbiguityError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class GridCoverageError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class SingularWidthError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace sciv

#endif  // SCIV_ERRORS_HPP
