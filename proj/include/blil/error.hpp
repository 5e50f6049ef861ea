#pragma once

#include <stdexcept>
#include <string>

namespace blil {

/// Argument outside an operation's domain (non-positive heights, bad ranks, ...).
class DomainError : public std::domain_error {
 public:
  explicit DomainError(const std::string& what) : std::domain_error(what) {}
};

/// A refinement loop hit its cap before meeting the requested tolerance.
/// The best available estimate is carried along.
class ToleranceError : public std::runtime_error {
 public:
  ToleranceError(const std::string& what, double partial)
      : std::runtime_error(what), partial_(partial) {}
  double partial() const noexcept { return partial_; }

 private:
  double partial_;
};

/// Weight inversion could not bracket the requested value inside [2^-1074, 1].
class UnboundedWeightError : public std::runtime_error {
 public:
  explicit UnboundedWeightError(const std::string& what) : std::runtime_error(what) {}
};

/// An integral that should exist for members of h^inf_w did not settle.
class DivergenceError : public std::runtime_error {
 public:
  explicit DivergenceError(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed token or config entry. `token` is the offending text.
class ParseError : public std::invalid_argument {
 public:
  ParseError(const std::string& what, std::string token)
      : std::invalid_argument(what + " (token: '" + token + "')"), message_(what), token_(std::move(token)) {}
  const std::string& message() const noexcept { return message_; }
  const std::string& token() const noexcept { return token_; }

 private:
  std::string message_;
  std::string token_;
};

/// Stopping-time parameters could not be chosen or would exceed resource limits.
class ConstructionError : public std::runtime_error {
 public:
  explicit ConstructionError(const std::string& what) : std::runtime_error(what) {}
};

/// Too few samples for the requested standard error.
class PrecisionError : public std::runtime_error {
 public:
  explicit PrecisionError(const std::string& what) : std::runtime_error(what) {}
};

/// Usage that breaks an object's lifecycle contract (e.g. mutation after freeze).
class ContractViolation : public std::logic_error {
 public:
  explicit ContractViolation(const std::string& what) : std::logic_error(what) {}
};

}  // namespace blil
