#pragma once

#include <stdexcept>
#include <string>

namespace svnplan {

/// Invalid or inconsistent user configuration (kernel family, layout, weights...).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Argument outside the domain where a formula is defined.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Vector or matrix sizes that do not agree.
class DimensionError : public std::length_error {
 public:
  using std::length_error::length_error;
};

/// A factorization or linear solve failed.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what, double smallest_eigenvalue = 0.0)
      : std::runtime_error(what), smallest_eigenvalue_(smallest_eigenvalue) {}

  double smallest_eigenvalue() const { return smallest_eigenvalue_; }

 private:
  double smallest_eigenvalue_;
};

/// Raised by the KKT solvers when the damped system is too ill-conditioned;
/// callers are expected to increase the damping and retry.
class DampingRequired : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace svnplan
