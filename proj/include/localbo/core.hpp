#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace localbo {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Read-only view of a point; binds to vectors and to rows/columns of matrices
/// without copying.
using PointRef = Eigen::Ref<const Vector, 0, Eigen::InnerStride<>>;

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Factorization of a kernel matrix failed even after jitter escalation.
class NumericalBreakdown : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An operation was requested that the object's contract does not allow,
/// e.g. querying a mean on a variance-only view.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Every restart of a minimization produced non-finite values.
class OptFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Evaluation requested outside an objective's domain.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

inline void require_dim(Eigen::Index got, Eigen::Index expected, const char* what) {
  if (got != expected) {
    throw DimensionError(std::string(what) + ": expected dimension " + std::to_string(expected) +
                         ", got " + std::to_string(got));
  }
}

}  // namespace localbo
