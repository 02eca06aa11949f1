#pragma once

#include <stdexcept>
#include <string>

namespace tnad {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor extents do not agree (contractions, reshapes, merged tensors).
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A caller-supplied argument violates a precondition.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// A real-valued input lies outside its admissible domain.
class RangeError : public Error {
 public:
  using Error::Error;
};

/// An object was used before it was fitted or initialized.
class StateError : public Error {
 public:
  using Error::Error;
};

/// Input to a factorization carries no information (e.g. an all-zero matrix).
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

/// Fitting a preprocessing step failed (e.g. a constant feature).
class FitError : public Error {
 public:
  using Error::Error;
};

/// Requested computation exceeds the configured memory budget.
class ResourceError : public Error {
 public:
  using Error::Error;
};

/// Conditioning event has (numerically) zero probability under the model.
class ConditioningError : public Error {
 public:
  ConditioningError(const std::string& what, double trace)
      : Error(what), trace_(trace) {}
  double trace() const noexcept { return trace_; }

 private:
  double trace_;
};

/// A numerical invariant was violated beyond tolerance.
class IntegrityError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent input data (CSV, model files, configs).
class DataError : public Error {
 public:
  using Error::Error;
};

}  // namespace tnad
