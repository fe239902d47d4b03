// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace prefopt {

/// Bad arguments or malformed domain objects (token id out of range,
/// empty dataset, shape mismatch, missing reference policy, ...).
class InvalidInputError : public std::invalid_argument {
 public:
  explicit InvalidInputError(const std::string& what) : std::invalid_argument(what) {}
};

/// Non-finite values encountered where finite arithmetic is required.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed persisted data. Carries the 1-based line number when known.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, long line)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  long line() const { return line_; }

 private:
  long line_;
};

/// Least-squares design is rank deficient (e.g. all abscissae equal).
class DegenerateFitError : public std::runtime_error {
 public:
  explicit DegenerateFitError(const std::string& what) : std::runtime_error(what) {}
};

/// Filesystem read/write failures.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace prefopt
