#pragma once

#include <stdexcept>
#include <string>

namespace msense {

/// Base class for all msense errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Invalid mathematical input (non-finite argument, value outside domain).
class DomainError : public Error {
 public:
  explicit DomainError(const std::string& msg) : Error(msg) {}
};

/// Evaluation of a kernel at zero separation.
class SingularityError : public DomainError {
 public:
  explicit SingularityError(const std::string& msg) : DomainError(msg) {}
};

/// Linear solve failed or exceeded the conditioning cap.
class SolveError : public Error {
 public:
  SolveError(const std::string& msg, double condition_estimate)
      : Error(msg), condition_estimate_(condition_estimate) {}
  double condition_estimate() const { return condition_estimate_; }

 private:
  double condition_estimate_;
};

/// Malformed or inconsistent configuration input.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

/// Element placement could not be generated (packing or rejection budget).
class PlacementError : public Error {
 public:
  explicit PlacementError(const std::string& msg) : Error(msg) {}
};

}  // namespace msense
