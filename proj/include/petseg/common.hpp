#pragma once

#include <stdexcept>
#include <string>

namespace petseg {

/// Base class for all errors raised by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Invalid shapes, out-of-range values, bad arguments.
struct ValueError : Error {
  using Error::Error;
};

/// File system and file format problems.
struct IoError : Error {
  using Error::Error;
};

/// Bad or inconsistent configuration.
struct ConfigError : Error {
  using Error::Error;
};

/// Non-finite values where finite ones are required (diverged training, corrupt input).
struct NumericError : Error {
  using Error::Error;
};

}  // namespace petseg
