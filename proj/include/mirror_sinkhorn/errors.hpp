#pragma once

#include <stdexcept>
#include <string>

namespace mirror_sinkhorn {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shapes of two operands do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// A value lies outside the domain of a function (zero marginal entry,
// log of zero where a positive value is required, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

// An iterate lost a row, column or slice to underflow.
class DegenerateIterateError : public Error {
 public:
  using Error::Error;
};

// A gradient oracle returned a non-finite or misshapen matrix.
class OracleError : public Error {
 public:
  using Error::Error;
};

// Invalid or incomplete configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed text input (CSV, config files).
class ParseError : public Error {
 public:
  using Error::Error;
};

// Problem exceeds a size guard.
class SizeLimitError : public Error {
 public:
  using Error::Error;
};

}  // namespace mirror_sinkhorn
