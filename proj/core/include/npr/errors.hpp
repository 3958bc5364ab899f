#pragma once

#include <stdexcept>
#include <string>

namespace npr {

/// Base class for everything thrown by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Invalid configuration / specification / argument values.
/// Messages carry the offending field path (e.g. "target.rank").
struct ConfigError : Error {
  using Error::Error;
};

/// Numeric failure: divergence, non-finite values, domain violations
/// (division by a zero-valued jet, Burgers evaluation past the shock, ...).
struct NumericError : Error {
  using Error::Error;
};

/// Filesystem / serialization failure.
struct IoError : Error {
  using Error::Error;
};

}  // namespace npr
