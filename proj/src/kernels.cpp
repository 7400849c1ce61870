#include "localbo/kernels.hpp"

#include <cmath>

namespace localbo {

namespace {

constexpr double kSqrt5 = 2.23606797749978969640917366873128;

}  // namespace

std::string to_string(KernelFamily family) {
  switch (family) {
    case KernelFamily::rbf:
      return "rbf";
    case KernelFamily::matern52:
      return "matern52";
  }
  return "unknown";
}

KernelFamily kernel_family_from_string(std::string_view name) {
  if (name == "rbf" || name == "RBF" || name == "se") return KernelFamily::rbf;
  if (name == "matern52" || name == "matern2.5" || name == "Matern2.5") return KernelFamily::matern52;
  throw InvalidArgument("unknown kernel family '" + std::string(name) + "'");
}

KernelSpec::KernelSpec(KernelFamily family, Vector lengthscales, double signal_variance)
    : family_(family), lengthscales_(std::move(lengthscales)), signal_variance_(signal_variance) {
  if (lengthscales_.size() == 0) throw InvalidArgument("kernel needs at least one lengthscale");
  for (Eigen::Index i = 0; i < lengthscales_.size(); ++i) {
    if (!(lengthscales_[i] > 0.0) || !std::isfinite(lengthscales_[i]))
      throw InvalidArgument("kernel lengthscales must be positive and finite");
  }
  if (!(signal_variance_ > 0.0) || !std::isfinite(signal_variance_))
    throw InvalidArgument("kernel signal variance must be positive and finite");
  inv_sq_lengthscales_ = lengthscales_.array().square().inverse();
}

KernelSpec KernelSpec::isotropic(KernelFamily family, int dim, double lengthscale,
                                 double signal_variance) {
  if (dim < 1) throw InvalidArgument("kernel dimension must be >= 1");
  return KernelSpec(family, Vector::Constant(dim, lengthscale), signal_variance);
}

void KernelSpec::check_point(PointRef x, const char* what) const {
  require_dim(x.size(), lengthscales_.size(), what);
}

double KernelSpec::eval(PointRef x, PointRef x2) const {
  check_point(x, "kernel_eval");
  check_point(x2, "kernel_eval");
  const double r2 = ((x - x2).array().square() * inv_sq_lengthscales_.array()).sum();
  if (family_ == KernelFamily::rbf) return signal_variance_ * std::exp(-0.5 * r2);
  const double r = std::sqrt(r2);
  return signal_variance_ * (1.0 + kSqrt5 * r + (5.0 / 3.0) * r2) * std::exp(-kSqrt5 * r);
}

Vector KernelSpec::grad_x(PointRef x, PointRef x2) const {
  check_point(x, "kernel_grad_x");
  check_point(x2, "kernel_grad_x");
  const Vector u = (x - x2).cwiseProduct(inv_sq_lengthscales_);
  const double r2 = (x - x2).dot(u);
  if (family_ == KernelFamily::rbf) return -signal_variance_ * std::exp(-0.5 * r2) * u;
  const double r = std::sqrt(r2);
  return -(5.0 / 3.0) * signal_variance_ * (1.0 + kSqrt5 * r) * std::exp(-kSqrt5 * r) * u;
}

Matrix KernelSpec::cross_hessian(PointRef x, PointRef x2) const {
  check_point(x, "kernel_cross_hessian");
  check_point(x2, "kernel_cross_hessian");
  const Vector u = (x - x2).cwiseProduct(inv_sq_lengthscales_);
  const double r2 = (x - x2).dot(u);
  Matrix h(dim(), dim());
  if (family_ == KernelFamily::rbf) {
    const double k = signal_variance_ * std::exp(-0.5 * r2);
    h.noalias() = -k * u * u.transpose();
    h.diagonal() += k * inv_sq_lengthscales_;
    return h;
  }
  const double r = std::sqrt(r2);
  const double e = std::exp(-kSqrt5 * r);
  h.noalias() = -(25.0 / 3.0) * signal_variance_ * e * u * u.transpose();
  h.diagonal() += (5.0 / 3.0) * signal_variance_ * (1.0 + kSqrt5 * r) * e * inv_sq_lengthscales_;
  return h;
}

Matrix KernelSpec::gram(const Matrix& a, const Matrix& b) const {
  if (a.rows() > 0) require_dim(a.cols(), dim(), "kernel gram (left)");
  if (b.rows() > 0) require_dim(b.cols(), dim(), "kernel gram (right)");
  const Eigen::Index n = a.rows();
  const Eigen::Index m = b.rows();
  // Scaled coordinates make the lag a plain Euclidean distance.
  const Matrix as = a * inv_sq_lengthscales_.cwiseSqrt().asDiagonal();
  const Matrix bs = b * inv_sq_lengthscales_.cwiseSqrt().asDiagonal();
  const Vector an = as.rowwise().squaredNorm();
  const Vector bn = bs.rowwise().squaredNorm();
  Matrix r2 = -2.0 * as * bs.transpose();
  r2.colwise() += an;
  r2.rowwise() += bn.transpose();
  Matrix k(n, m);
  const bool same = (&a == &b);
  for (Eigen::Index j = 0; j < m; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      double d2 = r2(i, j);
      if (same && i == j) d2 = 0.0;
      if (d2 < 0.0) d2 = 0.0;
      if (family_ == KernelFamily::rbf) {
        k(i, j) = signal_variance_ * std::exp(-0.5 * d2);
      } else {
        const double r = std::sqrt(d2);
        k(i, j) = signal_variance_ * (1.0 + kSqrt5 * r + (5.0 / 3.0) * d2) * std::exp(-kSqrt5 * r);
      }
    }
  }
  return k;
}

Vector KernelSpec::cross(PointRef x, const Matrix& b) const {
  check_point(x, "kernel cross");
  if (b.rows() > 0) require_dim(b.cols(), dim(), "kernel cross");
  Vector k(b.rows());
  for (Eigen::Index j = 0; j < b.rows(); ++j) {
    double r2 = 0.0;
    for (Eigen::Index c = 0; c < b.cols(); ++c) {
      const double diff = x[c] - b(j, c);
      r2 += diff * diff * inv_sq_lengthscales_[c];
    }
    if (family_ == KernelFamily::rbf) {
      k[j] = signal_variance_ * std::exp(-0.5 * r2);
    } else {
      const double r = std::sqrt(r2);
      k[j] = signal_variance_ * (1.0 + kSqrt5 * r + (5.0 / 3.0) * r2) * std::exp(-kSqrt5 * r);
    }
  }
  return k;
}

Matrix KernelSpec::grad_x_rows(PointRef x, const Matrix& b) const {
  check_point(x, "kernel grad rows");
  if (b.rows() > 0) require_dim(b.cols(), dim(), "kernel grad rows");
  Matrix g(b.rows(), dim());
  for (Eigen::Index j = 0; j < b.rows(); ++j) {
    double r2 = 0.0;
    for (Eigen::Index c = 0; c < b.cols(); ++c) {
      const double diff = x[c] - b(j, c);
      g(j, c) = diff * inv_sq_lengthscales_[c];
      r2 += diff * g(j, c);
    }
    double scale;
    if (family_ == KernelFamily::rbf) {
      scale = -signal_variance_ * std::exp(-0.5 * r2);
    } else {
      const double r = std::sqrt(r2);
      scale = -(5.0 / 3.0) * signal_variance_ * (1.0 + kSqrt5 * r) * std::exp(-kSqrt5 * r);
    }
    g.row(j) *= scale;
  }
  return g;
}

Matrix KernelSpec::grad_second_rows(const Matrix& a, PointRef x2) const {
  // Stationarity: dk(a, x2)/dx2 = dk(x2, a)/dx.
  return grad_x_rows(x2, a);
}

Vector KernelSpec::prior_gradient_variance() const {
  const double c = family_ == KernelFamily::rbf ? 1.0 : 5.0 / 3.0;
  return c * signal_variance_ * inv_sq_lengthscales_;
}

}  // namespace localbo
