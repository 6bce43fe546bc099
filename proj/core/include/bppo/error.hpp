#pragma once

#include <stdexcept>
#include <string>

namespace bppo {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// shape mismatch, bad slice bounds, out-of-range index
struct ShapeError : Error {
  using Error::Error;
};

// non-finite value produced by a numeric op
struct NumericError : Error {
  using Error::Error;
};

// invalid configuration value or combination
struct ConfigError : Error {
  using Error::Error;
};

// missing, unreadable or malformed file
struct IoError : Error {
  using Error::Error;
};

}  // namespace bppo
