#pragma once

#include <stdexcept>
#include <string>

namespace fprk {

/// Malformed input bytes: bad JSON line, truncated binary, bad header.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Well-formed input that breaks a data-model or configuration rule.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Filesystem failures (missing file, failed write or rename).
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace fprk
