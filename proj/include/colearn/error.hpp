#pragma once

#include <stdexcept>
#include <string>

namespace colearn {

// Base class for every error raised by the library. Subclasses name the
// failure category so callers (and the CLI) can map them to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Dataset is missing a group or carries inconsistent samples.
class InvalidDatasetError : public Error {
 public:
  using Error::Error;
};

// Vector or matrix dimensions disagree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// A configuration value is out of its admissible range.
class ParameterError : public Error {
 public:
  using Error::Error;
};

class EmptySetError : public Error {
 public:
  using Error::Error;
};

// Non-finite or otherwise unusable numeric input.
class InvalidDataError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

// Malformed external data (CSV, config).
class DataError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace colearn
