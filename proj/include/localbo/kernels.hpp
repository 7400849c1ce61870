#pragma once

#include "localbo/core.hpp"

#include <string>
#include <string_view>

namespace localbo {

enum class KernelFamily { rbf, matern52 };

std::string to_string(KernelFamily family);
KernelFamily kernel_family_from_string(std::string_view name);

/// Stationary kernel with per-dimension (ARD) lengthscales.
///
/// Both families are four times differentiable, so value, gradient and the
/// mixed second derivative d^2 k / dx dx'^T are available in closed form.
/// Immutable once constructed.
class KernelSpec {
 public:
  KernelSpec(KernelFamily family, Vector lengthscales, double signal_variance = 1.0);

  /// Same lengthscale in every dimension.
  static KernelSpec isotropic(KernelFamily family, int dim, double lengthscale,
                              double signal_variance = 1.0);

  KernelFamily family() const { return family_; }
  int dim() const { return static_cast<int>(lengthscales_.size()); }
  const Vector& lengthscales() const { return lengthscales_; }
  double signal_variance() const { return signal_variance_; }

  double eval(PointRef x, PointRef x2) const;

  /// dk/dx. Antisymmetric under swapping the arguments.
  Vector grad_x(PointRef x, PointRef x2) const;

  /// d^2 k / dx dx2^T. At x == x2 this is diag(c * s^2 / l_i^2) with c = 1
  /// for RBF and c = 5/3 for Matern 5/2.
  Matrix cross_hessian(PointRef x, PointRef x2) const;

  /// k(A_i, B_j) over the rows of A and B.
  Matrix gram(const Matrix& a, const Matrix& b) const;
  Matrix gram(const Matrix& a) const { return gram(a, a); }

  /// k(x, B_j) as a vector over the rows of B.
  Vector cross(PointRef x, const Matrix& b) const;

  /// Rows are dk(x, B_j)/dx, i.e. an n x d matrix.
  Matrix grad_x_rows(PointRef x, const Matrix& b) const;

  /// Rows are dk(A_i, x2)/dx2 (derivative in the second argument).
  Matrix grad_second_rows(const Matrix& a, PointRef x2) const;

  /// Lag-zero value of cross_hessian, a diagonal matrix.
  Vector prior_gradient_variance() const;

 private:
  void check_point(PointRef x, const char* what) const;

  KernelFamily family_;
  Vector lengthscales_;
  Vector inv_sq_lengthscales_;
  double signal_variance_;
};

}  // namespace localbo
