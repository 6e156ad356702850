// polyctc/common/errors.h
//
// SPDX-License-Identifier: Apache-2.0

#ifndef POLYCTC_COMMON_ERRORS_H_
#define POLYCTC_COMMON_ERRORS_H_

#include <stdexcept>
#include <string>

namespace polyctc {

// Shape disagreement inside a primitive. The message names the primitive
// and the offending extents.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A caller broke a documented precondition.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// NaN / Inf where a finite value is required.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Instance too large for an exhaustive routine.
class SizeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class VocabularyError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Binary file with a bad magic, version, or truncated payload.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed text input; carries the 1-based line number.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string &file, std::size_t line, const std::string &what)
      : std::runtime_error(file + ":" + std::to_string(line) + ": " + what),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

}  // namespace polyctc

#endif  // POLYCTC_COMMON_ERRORS_H_
