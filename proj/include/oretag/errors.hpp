#pragma once

#include <stdexcept>
#include <string>

namespace oretag {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand shapes do not satisfy an op's arity/shape rule.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// A configuration value is out of its allowed range.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Caller handed in data that breaks a precondition (bad index, empty span...).
class InputError : public Error {
 public:
  using Error::Error;
};

// A file or text record does not follow its format.
class FormatError : public Error {
 public:
  using Error::Error;
};

// API misuse, e.g. calling backward on a non-scalar.
class ContractError : public Error {
 public:
  using Error::Error;
};

}  // namespace oretag
