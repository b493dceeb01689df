#pragma once

#include <stdexcept>
#include <string>

namespace epinet {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// An input violates a documented precondition (sign, structure, range).
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent input tables.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Invalid scenario configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// An iterative method failed to converge or a numerical guard tripped.
class SolverError : public Error {
 public:
  using Error::Error;
};

/// The ODE state left the unit box; usually a sign that dt is too large.
class SimulationError : public SolverError {
 public:
  using SolverError::SolverError;
};

namespace detail {

inline void require_size(long got, long want, const char* what) {
  if (got != want) {
    throw DimensionError(std::string(what) + ": expected size " +
                         std::to_string(want) + ", got " + std::to_string(got));
  }
}

}  // namespace detail
}  // namespace epinet
