#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace viable {

// Base for every error raised by the library. Catch this to handle all of them.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// n = 0, empty inputs, pools smaller than the requested list.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Attention parameter outside its family's open domain.
class ParameterError : public Error {
 public:
  using Error::Error;
};

// A fit target (mean views, head weight, view bounds) no parameter can reach.
class InfeasibleTargetError : public Error {
 public:
  using Error::Error;
};

class LabelError : public Error {
 public:
  using Error::Error;
};

// Categorical operation on scalar data or the other way round.
class ModeError : public Error {
 public:
  using Error::Error;
};

// Length or count mismatch between vectors.
class ShapeError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed input file. Carries the 1-based line number when known (0 otherwise).
class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::size_t line)
      : Error(line == 0 ? message : "line " + std::to_string(line) + ": " + message),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace viable
