#pragma once

#include <stdexcept>
#include <string>

namespace planeloc {

/// Caller passed a value outside an operation's domain.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Too few or collinear points for a plane fit.
class DegenerateInput : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Innovation covariance too ill-conditioned to invert.
class NumericalDegeneracy : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NotFound : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// File could not be opened, read or written. The message names the path.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file. The message names the line or field.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class VersionError : public ParseError {
 public:
  using ParseError::ParseError;
};

}  // namespace planeloc
