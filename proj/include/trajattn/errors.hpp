// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace trajattn {

// Dimension mismatch between operands.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Operation called with an argument outside its domain (empty input,
// too-short trajectory, ...).
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Misuse of a stateful object, e.g. backward() on an empty tape.
class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Bad configuration value or unknown key.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input text. Carries the 1-based line number.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Well-formed input whose content violates a data invariant.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Model file could not be read back.
class LoadError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Evaluation protocol violated (e.g. an instance routed to a cluster with no model).
class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Finite-difference check could not be trusted.
class DiagnosticError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace trajattn
