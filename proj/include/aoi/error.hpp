#ifndef AOI_ERROR_HPP
#define AOI_ERROR_HPP

#include <stdexcept>
#include <string>

namespace aoi {

/// A parameter violates a documented invariant (alpha >= 1, sigma <= 0, ...).
class InvalidParameter : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A function was evaluated outside its domain (negative age, a > b, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Base for failures of the policy solver.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// No finite waiting threshold reaches the requested level.
class UnboundedThreshold : public SolverError {
 public:
  using SolverError::SolverError;
};

/// The outer bisection could not find a sign change of f.
class BracketingFailure : public SolverError {
 public:
  using SolverError::SolverError;
};

/// The penalty/channel pair was not certified and no override was given.
class PreconditionError : public SolverError {
 public:
  using SolverError::SolverError;
};

}  // namespace aoi

#endif  // AOI_ERROR_HPP
