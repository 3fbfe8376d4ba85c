#pragma once

#include <stdexcept>
#include <string>

namespace leray {

/// Raised when inputs violate an operation's preconditions or a parameter box.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a computation that started correctly cannot complete
/// (non-converging implicit step, blow-up guard, I/O failure).
class RuntimeFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class StepError : public RuntimeFailure {
 public:
  using RuntimeFailure::RuntimeFailure;
};

}  // namespace leray
