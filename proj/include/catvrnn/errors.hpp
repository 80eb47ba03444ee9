#pragma once

#include <stdexcept>
#include <string>

namespace catvrnn {

/// Base class for every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shapes, dimensions or hyperparameters that do not fit together.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A documented precondition on a value was violated (e.g. non-positive sigma).
class InvariantError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent corpus input.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Unreadable, truncated or mismatched checkpoint files.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// A loss or gradient became non-finite.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace catvrnn
