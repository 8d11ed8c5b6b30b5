#pragma once

#include <stdexcept>
#include <string>

namespace stirlab {

// Argument outside the mathematical domain of an operation (site not in a
// window, negative time, profile value outside [0,1], ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Caller broke a precondition that the type system could not express,
// e.g. applying an event that is not legal in the current configuration.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Requested object does not fit the hard limits (state-space caps, event budget).
class CapacityError : public std::length_error {
 public:
  using std::length_error::length_error;
};

// Malformed or incomplete experiment configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A numerical method could not reach its requested accuracy.
class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace stirlab
