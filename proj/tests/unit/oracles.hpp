#pragma once

// Independent reference computations used by the unit tests.

#include "localbo/core.hpp"

#include <functional>

namespace oracle {

using localbo::Matrix;
using localbo::Vector;

inline Vector fd_gradient(const std::function<double(const Vector&)>& f, const Vector& x, double h = 1e-6) {
  Vector g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Vector xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    g[i] = (f(xp) - f(xm)) / (2.0 * h);
  }
  return g;
}

inline Matrix fd_matrix_gradient(const std::function<double(const Matrix&)>& f, const Matrix& z, double h = 1e-6) {
  Matrix g(z.rows(), z.cols());
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    for (Eigen::Index j = 0; j < z.cols(); ++j) {
      Matrix zp = z, zm = z;
      zp(i, j) += h;
      zm(i, j) -= h;
      g(i, j) = (f(zp) - f(zm)) / (2.0 * h);
    }
  }
  return g;
}

/// Jacobian of a vector function, one row per output.
inline Matrix fd_jacobian(const std::function<Vector(const Vector&)>& f, const Vector& x, double h = 1e-6) {
  const Vector f0 = f(x);
  Matrix jac(f0.size(), x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Vector xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    jac.col(i) = (f(xp) - f(xm)) / (2.0 * h);
  }
  return jac;
}

/// Squared-exponential and Matern-5/2 written out directly from r.
inline double rbf(double r, double s2) { return s2 * std::exp(-0.5 * r * r); }
inline double matern52(double r, double s2) {
  const double a = std::sqrt(5.0) * r;
  return s2 * (1.0 + a + a * a / 3.0) * std::exp(-a);
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

inline double max_abs(const Matrix& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace oracle
