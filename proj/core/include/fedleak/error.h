#pragma once

#include <stdexcept>
#include <string>

namespace fedleak {

// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration, shape mismatch, or violated precondition.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed or truncated input file.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Reconstruction system has no usable rows (bias gradient singular).
class DegenerateSystemError : public Error {
 public:
  using Error::Error;
};

// Metric undefined for the given inputs (e.g. zero-norm reference).
class MetricError : public Error {
 public:
  using Error::Error;
};

// Non-finite loss or divergence during training.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace fedleak
