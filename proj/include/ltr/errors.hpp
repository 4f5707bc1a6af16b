#pragma once

#include <stdexcept>
#include <string>

namespace ltr {

// Error taxonomy used across the toolkit. The CLI maps ConfigError and
// ParseError to exit code 1, everything else to exit code 2.

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Bad configuration: unknown keys, invalid ranges, mismatched feature specs.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(what) {}
};

/// Malformed input data (LIBSVM / JSONL lines, vocabulary files).
class ParseError : public Error {
 public:
  explicit ParseError(const std::string& what) : Error(what) {}
};

/// Tensor shape mismatch between operands.
class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& what) : Error(what) {}
};

/// Non-finite values where finite ones are required.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error(what) {}
};

/// Input outside an operation's domain (e.g. labels out of range).
class DomainError : public Error {
 public:
  explicit DomainError(const std::string& what) : Error(what) {}
};

/// Operation invoked in the wrong order (e.g. backward without forward).
class StateError : public Error {
 public:
  explicit StateError(const std::string& what) : Error(what) {}
};

/// Filesystem and serialization failures, including checkpoint corruption.
class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(what) {}
};

}  // namespace ltr
