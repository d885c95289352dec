#pragma once

#include <stdexcept>
#include <string>

namespace phacklab {

/// Argument outside the mathematical domain of an operation (u not in (0,1), l <= 0, NaN input).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A belief update pushed the smaller of the two state weights below the
/// smallest normal double.
class SaturationError : public std::range_error {
 public:
  using std::range_error::range_error;
};

/// Success model / payoff parameters that violate the model assumptions.
class ModelError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A payoff value is not representable as a finite double.
class OverflowError : public std::overflow_error {
 public:
  using std::overflow_error::overflow_error;
};

/// The feasible-bracket root search could not bracket its root.
class BracketError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input to an analysis routine (e.g. a trajectory without drift records).
class DiagnosticsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid experiment configuration; the message lists every offending field.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace phacklab
