#pragma once

#include <stdexcept>
#include <string>

namespace codemix {

// Base class for all toolkit errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input text; the message carries the 1-based line number.
class ParseError : public Error {
 public:
  ParseError(const std::string& msg, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + msg), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Well-formed input that violates a data invariant (bad tree, mismatched
// ids, inconsistent dimensions). The message names the offending sentence
// or pair where one exists.
class DataError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration value.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A caller broke an API precondition; indicates a bug, not bad input.
class ContractViolation : public Error {
 public:
  using Error::Error;
};

// Filesystem-level failure (missing file, short read).
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace codemix
