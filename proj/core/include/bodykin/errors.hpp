#pragma once

#include <stdexcept>
#include <string>

namespace bodykin {

/// Base class for every error thrown by this library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Caller passed inconsistent arguments: dimension mismatches, out-of-range
/// parameters, inputs that violate a documented precondition.
class ParamError : public Error {
 public:
  using Error::Error;
};

/// A computation produced or received non-finite values.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Geometry too degenerate to solve: rank-deficient point sets, zero-length
/// edges, empty crops. `rank()` reports the observed rank where that is
/// meaningful and -1 otherwise.
class DegenerateError : public Error {
 public:
  explicit DegenerateError(const std::string& what, int rank = -1)
      : Error(what), rank_(rank) {}
  int rank() const noexcept { return rank_; }

 private:
  int rank_;
};

/// File or stream could not be read, written, or parsed.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Requested an operation the given model or data does not support.
class UnsupportedError : public Error {
 public:
  using Error::Error;
};

}  // namespace bodykin
