#pragma once

#include <stdexcept>
#include <string>

namespace shiftguard {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DimensionError : Error {
  using Error::Error;
};

struct DomainError : Error {
  using Error::Error;
};

// Thrown when a matrix that must be inverted is (numerically) singular.
struct IllConditionedError : Error {
  IllConditionedError(const std::string& what, double eigenvalue)
      : Error(what + " (offending eigenvalue " + std::to_string(eigenvalue) + ")"),
        offending_eigenvalue(eigenvalue) {}
  double offending_eigenvalue;
};

struct TrainingError : Error {
  using Error::Error;
};

struct ParseError : Error {
  using Error::Error;
};

struct VersionError : ParseError {
  using ParseError::ParseError;
};

// Solver could not certify a bound (infeasible or unbounded program).
struct CertificationError : Error {
  using Error::Error;
};

// Numerical failure inside the conic solver backend.
struct SolverError : Error {
  using Error::Error;
};

}  // namespace shiftguard
