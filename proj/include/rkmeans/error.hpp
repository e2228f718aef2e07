#pragma once

#include <stdexcept>
#include <string>

namespace rkmeans {

// Base of every error raised by the library. The CLI maps the concrete type
// to an exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed CSV input: missing column, unparsable value, empty file.
class LoadError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration or query declaration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// The join query is not alpha-acyclic.
class UnsupportedQueryError : public Error {
 public:
  using Error::Error;
};

// A configured resource cap (materialization size) would be exceeded.
class ResourceCapError : public Error {
 public:
  using Error::Error;
};

// A 64-bit join-count accumulator overflowed.
class OverflowError : public Error {
 public:
  using Error::Error;
};

// A caller broke a documented precondition.
class ContractViolation : public Error {
 public:
  using Error::Error;
};

}  // namespace rkmeans
