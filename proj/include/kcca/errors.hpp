#pragma once

#include <stdexcept>
#include <string>

namespace kcca {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Mismatched dimensions or otherwise malformed matrix shapes.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Out-of-range or inconsistent configuration values.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Failures of numerical routines (divergence, rank deficiency, non-finite values).
class NumericError : public Error {
 public:
  using Error::Error;
};

/// File-system and format errors; messages always carry the offending path.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace kcca
