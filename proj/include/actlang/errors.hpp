#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace actlang {

// Malformed input record. Carries the 1-based line number when known.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class ProfileConflictError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

class ValidationError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

class EncodingError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

class LoadError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

class TrainingError : public std::runtime_error {
 public:
  TrainingError(int epoch, const std::string& what)
      : std::runtime_error("epoch " + std::to_string(epoch) + ": " + what), epoch_(epoch) {}
  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

class SingularFitError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Raised when an internal contract (e.g. fold disjointness) is broken.
class InvariantViolation : public std::logic_error {
  using std::logic_error::logic_error;
};

}  // namespace actlang
