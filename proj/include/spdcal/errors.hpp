#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace spdcal {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Precondition violated by a caller-supplied value.
class InvalidArgument : public Error {
public:
  using Error::Error;
};

/// Malformed input file. The message names the file, line and what was expected.
class ParseError : public Error {
public:
  ParseError(std::string file, std::size_t line, const std::string& expectation);

  const std::string& file() const { return file_; }
  std::size_t line() const { return line_; }

private:
  std::string file_;
  std::size_t line_;
};

/// Detector or dead-time model driven beyond its valid range (m * tau >= 1).
class SaturationError : public Error {
public:
  using Error::Error;
};

/// Least-squares design matrix is singular.
class SingularFitError : public Error {
public:
  using Error::Error;
};

/// Non-fatal conditions attached to a result.
using Warnings = std::vector<std::string>;

}  // namespace spdcal
