#pragma once

#include <stdexcept>
#include <string>

namespace hitlbo {

// Base of every error raised by the library. The HTTP layer and the CLI map
// the concrete subclasses onto status codes / exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A parameter space, refinement or config is inconsistent.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// A value lies outside the bounds of its parameter.
class RangeError : public Error {
 public:
  using Error::Error;
};

// A function argument violates its documented precondition.
class ParameterError : public Error {
 public:
  using Error::Error;
};

// Linear algebra failed (e.g. Cholesky after maximum jitter).
class NumericalError : public Error {
 public:
  using Error::Error;
};

// Every hyperparameter restart failed.
class FittingError : public Error {
 public:
  using Error::Error;
};

// The candidate pool has nothing left to offer.
class ExhaustionError : public Error {
 public:
  using Error::Error;
};

// The campaign is not in a state that permits the operation.
class StateError : public Error {
 public:
  using Error::Error;
};

// A mutation would break an Observation / CampaignState invariant.
class InvariantError : public Error {
 public:
  using Error::Error;
};

// A mutation targets a round that is no longer the latest one.
class ConflictError : public Error {
 public:
  using Error::Error;
};

class NotFoundError : public Error {
 public:
  using Error::Error;
};

// Malformed input text (CSV, JSON, CLI value).
class ParseError : public Error {
 public:
  using Error::Error;
};

// Campaign file written by an incompatible schema major version.
class VersionError : public Error {
 public:
  using Error::Error;
};

}  // namespace hitlbo
