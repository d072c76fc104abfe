#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cot3d {

// Base of every error thrown by the library. The CLI maps subclasses to exit
// codes, so new error kinds should derive from the closest existing one.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class DegenerateError : public Error {
 public:
  using Error::Error;
};

class CapacityError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class RangeError : public Error {
 public:
  using Error::Error;
};

class EvaluationError : public Error {
 public:
  using Error::Error;
};

class CheckpointError : public Error {
 public:
  using Error::Error;
};

class TrainingDivergence : public Error {
 public:
  TrainingDivergence(const std::string& what, long step)
      : Error(what + " (step " + std::to_string(step) + ")"), step_(step) {}
  long step() const { return step_; }

 private:
  long step_;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Carries a machine-readable code such as MISSING_STAGE_2.
class ValidationError : public Error {
 public:
  ValidationError(std::string code, const std::string& what)
      : Error(code + ": " + what), code_(std::move(code)) {}
  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

// Transport-level failure; callers may retry.
class TransportError : public Error {
 public:
  using Error::Error;
};

}  // namespace cot3d
