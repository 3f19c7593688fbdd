#pragma once

#include <stdexcept>
#include <string>

namespace vlc {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Geometric or numeric input outside an operation's domain.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Container shapes that do not agree with each other.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Assignment that cannot be evaluated under the requested objective,
/// e.g. a starved user under the logarithmic objective.
class InfeasibleAssignmentError : public Error {
 public:
  using Error::Error;
};

/// Series or iteration that does not converge.
class NonConvergenceError : public Error {
 public:
  using Error::Error;
};

/// Work estimate above a configured cap.
class ResourceLimitError : public Error {
 public:
  using Error::Error;
};

}  // namespace vlc
