#pragma once

#include "localbo/core.hpp"
#include "localbo/kernels.hpp"

#include <cstdint>

namespace localbo {

/// Observations y_i = f(X_i) + eps_i with eps_i ~ N(0, noise_sigma^2).
struct Dataset {
  Matrix X;
  Vector y;
  double noise_sigma = 0.0;

  Dataset() = default;
  Dataset(int dim, double noise_sigma);
  Dataset(Matrix x, Vector y, double noise_sigma);

  int size() const { return static_cast<int>(X.rows()); }
  int dim() const { return static_cast<int>(X.cols()); }

  /// Returns a copy with the rows (z, yz) appended.
  Dataset appended(const Matrix& z, const Vector& yz) const;
};

/// Diagonal jitter levels (relative to the signal variance) tried in order
/// when a kernel matrix fails to factorize.
inline constexpr double kJitterLevels[] = {0.0, 1e-10, 1e-8, 1e-6};

/// Posterior covariance k_D(., .) of a zero-mean GP conditioned on a set of
/// inputs. It does not know any observed values, so mean queries are a
/// contract violation. Obtained from GpModel::condition_inputs_only.
class VarianceView {
 public:
  /// Prior covariance (no conditioning inputs).
  VarianceView(KernelSpec kernel, int dim, double noise_sigma);

  /// Factorizes k(X,X) + sigma^2 I with jitter escalation.
  VarianceView(KernelSpec kernel, Matrix inputs, double noise_sigma);

  const KernelSpec& kernel() const { return kernel_; }
  const Matrix& inputs() const { return inputs_; }
  double noise_sigma() const { return noise_sigma_; }
  int size() const { return static_cast<int>(inputs_.rows()); }
  int dim() const { return kernel_.dim(); }

  /// Lower Cholesky factor of k(X,X) + (sigma^2 + jitter) I.
  const Matrix& cholesky() const { return chol_; }
  double jitter() const { return jitter_; }

  double posterior_var(PointRef x) const;
  Vector posterior_var_grad(PointRef x) const;
  Matrix posterior_cov(const Matrix& a, const Matrix& b) const;

  /// Covariance of the gradient of f at x: H(x,x) - J K^-1 J^T.
  Matrix grad_cov(PointRef x) const;

  /// Conditions on extra inputs; the factor is extended by a block update.
  VarianceView condition_inputs_only(const Matrix& z) const;

  [[noreturn]] double posterior_mean(PointRef x) const;
  [[noreturn]] Vector posterior_mean_grad(PointRef x) const;

  /// (k(X,X) + sigma^2 I)^-1 rhs.
  Matrix solve(const Matrix& rhs) const;
  Vector solve(const Vector& rhs) const;

  /// L^-1 rhs.
  Matrix half_solve(const Matrix& rhs) const;
  Vector half_solve(const Vector& rhs) const;

 private:
  VarianceView(KernelSpec kernel, Matrix inputs, double noise_sigma, Matrix chol, double jitter);
  void factorize();

  KernelSpec kernel_;
  Matrix inputs_;
  double noise_sigma_;
  Matrix chol_;
  double jitter_ = 0.0;
};

/// Exact GP posterior with fixed hyperparameters.
class GpModel {
 public:
  GpModel(KernelSpec kernel, Dataset data);

  const KernelSpec& kernel() const { return cov_.kernel(); }
  const Dataset& data() const { return data_; }
  const VarianceView& covariance() const { return cov_; }
  const Vector& alpha() const { return alpha_; }
  int dim() const { return cov_.dim(); }
  int size() const { return data_.size(); }
  double noise_sigma() const { return data_.noise_sigma; }

  double posterior_mean(PointRef x) const;
  double posterior_var(PointRef x) const { return cov_.posterior_var(x); }
  double posterior_sd(PointRef x) const;
  /// Posterior means at the rows of a.
  Vector posterior_means(const Matrix& a) const;
  Matrix posterior_cov(const Matrix& a, const Matrix& b) const { return cov_.posterior_cov(a, b); }

  Vector posterior_mean_grad(PointRef x) const;
  Vector posterior_var_grad(PointRef x) const { return cov_.posterior_var_grad(x); }
  Matrix grad_cov(PointRef x) const { return cov_.grad_cov(x); }

  VarianceView condition_inputs_only(const Matrix& z) const { return cov_.condition_inputs_only(z); }

  /// Model conditioned on D and (z, yz); equal to refitting on the union.
  GpModel fantasy_update(const Matrix& z, const Vector& yz) const;

 private:
  GpModel(VarianceView cov, Dataset data);

  VarianceView cov_;
  Dataset data_;
  Vector alpha_;
};

GpModel fit(const KernelSpec& kernel, const Dataset& data);

/// A prior sample path represented with random Fourier features:
/// f(x) = scale * sum_i w_i cos(omega_i . x + phase_i).
class GpPath {
 public:
  GpPath(KernelSpec kernel, Matrix frequencies, Vector phases, Vector weights);

  const KernelSpec& kernel() const { return kernel_; }
  int dim() const { return kernel_.dim(); }
  int num_features() const { return static_cast<int>(phases_.size()); }

  double value(PointRef x) const;
  Vector gradient(PointRef x) const;
  Matrix hessian(PointRef x) const;

 private:
  KernelSpec kernel_;
  Matrix frequencies_;
  Vector phases_;
  Vector weights_;
  double scale_;
};

GpPath sample_prior_path(const KernelSpec& kernel, int num_features, std::uint64_t seed);

inline double eval_path(const GpPath& path, PointRef x) { return path.value(x); }

/// Joint posterior draws at the rows of probe; result is count x probe.rows().
Matrix sample_posterior_paths(const GpModel& model, const Matrix& probe, int count, std::uint64_t seed);

/// Lower Cholesky factor of a covariance matrix, escalating jitter through
/// kJitterLevels; throws NumericalBreakdown if every level fails.
Matrix robust_cholesky(const Matrix& cov, double scale, double* jitter_used = nullptr);

}  // namespace localbo
