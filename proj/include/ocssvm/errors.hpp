#pragma once

#include <stdexcept>
#include <string>

namespace ocssvm {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Mismatched vector/matrix dimensions.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Argument outside the mathematical domain of an operation
// (negative histogram bin, epsilon == 1, non-SPD covariance, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

// Malformed input file or stream.
class FormatError : public Error {
 public:
  using Error::Error;
};

class VersionError : public FormatError {
 public:
  using FormatError::FormatError;
};

class ChecksumError : public FormatError {
 public:
  using FormatError::FormatError;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace ocssvm
