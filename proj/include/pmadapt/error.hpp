#pragma once

#include <stdexcept>
#include <string>

namespace pmadapt {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller passed arguments that violate an operation's preconditions.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A chain reached a state the kernel cannot continue from.
class InvalidChainState : public Error {
 public:
  using Error::Error;
};

/// A likelihood estimator could not produce a value (e.g. mode finding failed).
class EstimatorError : public Error {
 public:
  using Error::Error;
};

/// Statistic undefined for the given input (zero variance, too short, ...).
class DegenerateInput : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

}  // namespace pmadapt
