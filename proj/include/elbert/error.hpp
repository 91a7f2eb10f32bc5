#pragma once

#include <stdexcept>
#include <string>

namespace elbert {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid caller-supplied data: out-of-range ids, empty input, bad labels.
class InputError : public Error {
 public:
  using Error::Error;
};

/// A configuration object violates its invariants.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// An API was driven outside its contract (e.g. observing a fired engine).
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Malformed file content; carries a 1-based line number when known.
class ParseError : public Error {
 public:
  explicit ParseError(const std::string& what, long line = -1)
      : Error(line >= 0 ? what + " (line " + std::to_string(line) + ")" : what),
        line_(line) {}
  long line() const { return line_; }

 private:
  long line_;
};

/// Filesystem failure: unreadable, unwritable, or truncated files.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values appeared during a forward/backward pass.
class NumericError : public Error {
 public:
  NumericError(const std::string& what, int layer)
      : Error(what + " (layer " + std::to_string(layer) + ")"), layer_(layer) {}
  int layer() const { return layer_; }

 private:
  int layer_;
};

}  // namespace elbert
