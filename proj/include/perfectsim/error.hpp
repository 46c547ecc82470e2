#pragma once

#include <stdexcept>
#include <string>

namespace perfectsim {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid parameters or configuration (caught before any sampling starts).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A sampler could not complete: divergent mass, rejection floor, caps.
class SamplingError : public Error {
 public:
  using Error::Error;
};

}  // namespace perfectsim
