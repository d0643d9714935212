#pragma once

#include <stdexcept>
#include <string>

namespace cfl {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand shapes do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Input is valid in shape but numerically degenerate (constant column,
// single class, zero-norm embedding, too few rows).
class DegenerateError : public Error {
 public:
  using Error::Error;
};

// Malformed or unusable dataset.
class DataError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Training produced a non-finite loss or gradient.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

// A silo view violates the zero-fill invariant.
class CorruptionError : public Error {
 public:
  using Error::Error;
};

}  // namespace cfl
