#pragma once

#include <stdexcept>
#include <string>

namespace susd {

// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Tensor/network shape disagreement.
struct DimensionError : Error {
  using Error::Error;
};

// A precondition of an operation was violated by the caller.
struct ContractError : Error {
  using Error::Error;
};

// Training produced NaN/inf; message names the offending parameter or step.
struct DivergenceError : Error {
  using Error::Error;
};

// Invalid configuration (unknown key, bad value, missing file).
struct ConfigError : Error {
  using Error::Error;
};

// Filesystem / serialization failure.
struct IoError : Error {
  using Error::Error;
};

}  // namespace susd
