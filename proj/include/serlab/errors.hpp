#pragma once

#include <stdexcept>
#include <string>

namespace serlab {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration (sizes, fractions, thresholds).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Bad call argument (empty batch, non-finite input, bad range).
class ArgumentError : public Error {
 public:
  using Error::Error;
};

// Dimension mismatch between data and parameters.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Unknown question/answer/pair id.
class LookupError : public Error {
 public:
  using Error::Error;
};

// Non-finite loss or objective during training.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

// Corrupt or mismatched file content.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Artifact does not fit the current run (e.g. checkpoint dimension).
class CompatibilityError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace serlab
