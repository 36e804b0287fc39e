#pragma once

#include <stdexcept>
#include <string>

namespace bodylift {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor or batch dimensions do not line up.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Invalid hyperparameter, weight or option.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed dataset, skeleton or checkpoint content.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf or otherwise unusable numeric state.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Geometry that admits no unique answer (e.g. collinear joints under Procrustes).
class DegenerateError : public Error {
 public:
  using Error::Error;
};

}  // namespace bodylift
