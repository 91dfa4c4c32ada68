#pragma once

#include <stdexcept>
#include <string>

namespace bermudan {

/// Raised when a model, payoff, basis or config violates its invariants.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a persisted file cannot be parsed or does not match its header.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised by the harness when a dual estimate falls below a primal one by
/// more than the allowed statistical margin.
class WeakDualityViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void require(bool condition, const std::string& message) {
  if (!condition) throw ValidationError(message);
}

}  // namespace detail
}  // namespace bermudan
