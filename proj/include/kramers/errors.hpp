#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace kramers {

/// Violated precondition on an argument (dimension mismatch, out-of-range parameter).
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Argument outside the mathematical domain of a closed-form expression.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// The saddle Hessian has a zero eigenvalue, so the prefactor is undefined.
class DegenerateSaddleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Requested discretization would exceed the configured memory budget.
class SizeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Iterative eigensolver ran out of iterations. Carries the Ritz data reached so far.
class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& what, std::vector<double> ritz_values,
              std::vector<double> residuals)
      : std::runtime_error(what),
        ritz_values_(std::move(ritz_values)),
        residuals_(std::move(residuals)) {}

  const std::vector<double>& ritz_values() const noexcept { return ritz_values_; }
  const std::vector<double>& residuals() const noexcept { return residuals_; }

 private:
  std::vector<double> ritz_values_;
  std::vector<double> residuals_;
};

namespace detail {

inline void require(bool condition, const char* message) {
  if (!condition) throw ContractError(message);
}

}  // namespace detail
}  // namespace kramers
