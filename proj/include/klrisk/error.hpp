#pragma once

#include <stdexcept>
#include <string>

namespace klrisk {

// Two roots: InputError covers anything the caller can fix by changing
// arguments or data (CLI exit code 1); NumericalError covers failures of
// a numerical procedure on otherwise valid input (CLI exit code 2).

class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parameter or argument outside its admissible domain.
class DomainError : public InputError {
 public:
  using InputError::InputError;
};

/// Malformed text input (CSV rows, family spec strings).
class FormatError : public InputError {
 public:
  using InputError::InputError;
};

class EmptyDataError : public InputError {
 public:
  using InputError::InputError;
};

/// Operation requested for a family or censoring pattern it does not cover.
class UnsupportedError : public InputError {
 public:
  using InputError::InputError;
};

/// The truth puts mass where the model has none.
class DivergenceUndefinedError : public InputError {
 public:
  using InputError::InputError;
};

/// Maximum attained on the boundary of the parameter space.
class BoundaryError : public InputError {
 public:
  using InputError::InputError;
};

/// Closed form does not exist for this dataset (e.g. no events).
class DegenerateError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Objective not finite at the starting point.
class StartError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class BracketError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class MonotonicityError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Bracket search for the smoothing weight ran out of range.
class RangeError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// A cross-validation training fold has no events.
class FoldError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Too many replicate failures in a simulation harness.
class HarnessError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace klrisk
