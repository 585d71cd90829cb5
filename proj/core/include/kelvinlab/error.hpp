#pragma once

#include <stdexcept>
#include <string>

namespace kelvinlab {

/// Rank, grid or shape mismatch between operands.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An operation's stated precondition does not hold (e.g. non-solenoidal input).
class PreconditionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// User supplied data (basis files, loops, config values) failed validation.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Explicit time stepping left its stability region or produced NaNs.
class StabilityError : public std::runtime_error {
 public:
  StabilityError(const std::string& what, long step) : std::runtime_error(what), step_(step) {}
  long step() const noexcept { return step_; }

 private:
  long step_;
};

/// Label-map steepening or loop under-resolution.
class ResolutionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Configuration file problem; names the offending key and its line.
class ConfigError : public ValidationError {
 public:
  ConfigError(const std::string& key, int line, const std::string& message)
      : ValidationError(format(key, line, message)), key_(key), line_(line) {}
  const std::string& key() const noexcept { return key_; }
  int line() const noexcept { return line_; }

 private:
  static std::string format(const std::string& key, int line, const std::string& message) {
    std::string s = "config key '" + key + "'";
    if (line > 0) s += " (line " + std::to_string(line) + ")";
    return s + ": " + message;
  }
  std::string key_;
  int line_;
};

}  // namespace kelvinlab
