#include "localbo/gp.hpp"

#include "localbo/random.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace localbo {

namespace {

void require_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) throw InvalidArgument(std::string(what) + " contains non-finite values");
}

Matrix stack_rows(const Matrix& top, const Matrix& bottom) {
  Matrix out(top.rows() + bottom.rows(), bottom.cols());
  if (top.rows() > 0) out.topRows(top.rows()) = top;
  out.bottomRows(bottom.rows()) = bottom;
  return out;
}

}  // namespace

Dataset::Dataset(int dim, double noise) : X(0, dim), y(0), noise_sigma(noise) {}

Dataset::Dataset(Matrix x, Vector yv, double noise) : X(std::move(x)), y(std::move(yv)), noise_sigma(noise) {
  if (X.rows() != y.size()) throw DimensionError("dataset: X rows and y length differ");
}

Dataset Dataset::appended(const Matrix& z, const Vector& yz) const {
  if (z.rows() != yz.size()) throw DimensionError("dataset append: Z rows and y length differ");
  if (z.rows() == 0) return *this;
  require_dim(z.cols(), X.cols(), "dataset append");
  Vector ynew(y.size() + yz.size());
  ynew << y, yz;
  return Dataset(stack_rows(X, z), std::move(ynew), noise_sigma);
}

Matrix robust_cholesky(const Matrix& cov, double scale, double* jitter_used) {
  std::ostringstream tried;
  for (double level : kJitterLevels) {
    const double jitter = level * scale;
    Matrix a = cov;
    a.diagonal().array() += jitter;
    Eigen::LLT<Matrix> llt(a);
    if (llt.info() == Eigen::Success && llt.matrixL().toDenseMatrix().allFinite()) {
      if (jitter_used) *jitter_used = jitter;
      return llt.matrixL();
    }
    tried << (tried.tellp() > 0 ? ", " : "") << jitter;
  }
  throw NumericalBreakdown("Cholesky factorization failed for jitter levels {" + tried.str() + "}");
}

// ---------------------------------------------------------------------------
// VarianceView

VarianceView::VarianceView(KernelSpec kernel, int dim, double noise_sigma)
    : kernel_(std::move(kernel)), inputs_(0, dim), noise_sigma_(noise_sigma), chol_(0, 0) {
  require_dim(dim, kernel_.dim(), "variance view");
  if (!(noise_sigma_ > 0.0)) throw InvalidArgument("noise_sigma must be positive");
}

VarianceView::VarianceView(KernelSpec kernel, Matrix inputs, double noise_sigma)
    : kernel_(std::move(kernel)), inputs_(std::move(inputs)), noise_sigma_(noise_sigma) {
  if (!(noise_sigma_ > 0.0)) throw InvalidArgument("noise_sigma must be positive");
  if (inputs_.rows() == 0) inputs_.resize(0, kernel_.dim());
  require_dim(inputs_.cols(), kernel_.dim(), "variance view inputs");
  require_finite(inputs_, "GP inputs");
  factorize();
}

VarianceView::VarianceView(KernelSpec kernel, Matrix inputs, double noise_sigma, Matrix chol,
                           double jitter)
    : kernel_(std::move(kernel)),
      inputs_(std::move(inputs)),
      noise_sigma_(noise_sigma),
      chol_(std::move(chol)),
      jitter_(jitter) {}

void VarianceView::factorize() {
  Matrix k = kernel_.gram(inputs_);
  k.diagonal().array() += noise_sigma_ * noise_sigma_;
  chol_ = robust_cholesky(k, kernel_.signal_variance(), &jitter_);
}

Matrix VarianceView::half_solve(const Matrix& rhs) const {
  if (size() == 0) return Matrix(0, rhs.cols());
  return chol_.triangularView<Eigen::Lower>().solve(rhs);
}

Vector VarianceView::half_solve(const Vector& rhs) const {
  if (size() == 0) return Vector(0);
  return chol_.triangularView<Eigen::Lower>().solve(rhs);
}

Matrix VarianceView::solve(const Matrix& rhs) const {
  if (size() == 0) return Matrix(0, rhs.cols());
  return chol_.transpose().triangularView<Eigen::Upper>().solve(half_solve(rhs));
}

Vector VarianceView::solve(const Vector& rhs) const {
  if (size() == 0) return Vector(0);
  return chol_.transpose().triangularView<Eigen::Upper>().solve(half_solve(rhs));
}

double VarianceView::posterior_var(PointRef x) const {
  require_dim(x.size(), dim(), "posterior_var");
  const double prior = kernel_.signal_variance();
  if (size() == 0) return prior;
  const Vector v = half_solve(kernel_.cross(x, inputs_));
  return std::clamp(prior - v.squaredNorm(), 0.0, prior);
}

Vector VarianceView::posterior_var_grad(PointRef x) const {
  require_dim(x.size(), dim(), "posterior_var_grad");
  if (size() == 0) return Vector::Zero(dim());
  const Vector w = solve(Vector(kernel_.cross(x, inputs_)));
  return -2.0 * kernel_.grad_x_rows(x, inputs_).transpose() * w;
}

Matrix VarianceView::posterior_cov(const Matrix& a, const Matrix& b) const {
  Matrix k = kernel_.gram(a, b);
  if (size() == 0) return k;
  const Matrix va = half_solve(Matrix(kernel_.gram(inputs_, a)));
  const Matrix vb = half_solve(Matrix(kernel_.gram(inputs_, b)));
  k.noalias() -= va.transpose() * vb;
  return k;
}

Matrix VarianceView::grad_cov(PointRef x) const {
  require_dim(x.size(), dim(), "grad_cov");
  Matrix h = kernel_.prior_gradient_variance().asDiagonal();
  if (size() == 0) return h;
  const Matrix w = half_solve(kernel_.grad_x_rows(x, inputs_));
  h.noalias() -= w.transpose() * w;
  return 0.5 * (h + h.transpose());
}

VarianceView VarianceView::condition_inputs_only(const Matrix& z) const {
  if (z.rows() == 0) return *this;
  require_dim(z.cols(), dim(), "condition_inputs_only");
  require_finite(z, "conditioning inputs");
  const Eigen::Index n = size();
  const Eigen::Index b = z.rows();
  const Matrix cross = half_solve(Matrix(kernel_.gram(inputs_, z)));
  Matrix schur = kernel_.gram(z);
  schur.diagonal().array() += noise_sigma_ * noise_sigma_ + jitter_;
  if (n > 0) schur.noalias() -= cross.transpose() * cross;
  Eigen::LLT<Matrix> llt(schur);
  if (llt.info() != Eigen::Success) {
    return VarianceView(kernel_, stack_rows(inputs_, z), noise_sigma_);
  }
  Matrix chol = Matrix::Zero(n + b, n + b);
  if (n > 0) {
    chol.topLeftCorner(n, n) = chol_;
    chol.bottomLeftCorner(b, n) = cross.transpose();
  }
  chol.bottomRightCorner(b, b) = llt.matrixL();
  return VarianceView(kernel_, stack_rows(inputs_, z), noise_sigma_, std::move(chol), jitter_);
}

double VarianceView::posterior_mean(PointRef) const {
  throw ContractViolation("posterior_mean queried on a variance-only view (no observations)");
}

Vector VarianceView::posterior_mean_grad(PointRef) const {
  throw ContractViolation("posterior_mean_grad queried on a variance-only view (no observations)");
}

// ---------------------------------------------------------------------------
// GpModel

namespace {

Dataset validated(const KernelSpec& kernel, Dataset data) {
  if (data.X.rows() == 0) data.X.resize(0, kernel.dim());
  require_dim(data.X.cols(), kernel.dim(), "GP fit");
  if (data.X.rows() != data.y.size()) throw DimensionError("GP fit: X rows and y length differ");
  if (!(data.noise_sigma > 0.0)) throw InvalidArgument("GP fit: noise_sigma must be positive");
  require_finite(data.y, "GP observations");
  return data;
}

}  // namespace

GpModel::GpModel(KernelSpec kernel, Dataset data)
    : cov_(kernel, validated(kernel, data).X, data.noise_sigma), data_(validated(kernel, std::move(data))) {
  alpha_ = cov_.solve(data_.y);
}

GpModel::GpModel(VarianceView cov, Dataset data) : cov_(std::move(cov)), data_(std::move(data)) {
  alpha_ = cov_.solve(data_.y);
}

GpModel fit(const KernelSpec& kernel, const Dataset& data) { return GpModel(kernel, data); }

double GpModel::posterior_mean(PointRef x) const {
  require_dim(x.size(), dim(), "posterior_mean");
  if (size() == 0) return 0.0;
  return kernel().cross(x, data_.X).dot(alpha_);
}

double GpModel::posterior_sd(PointRef x) const { return std::sqrt(posterior_var(x)); }

Vector GpModel::posterior_means(const Matrix& a) const {
  if (size() == 0) return Vector::Zero(a.rows());
  return kernel().gram(a, data_.X) * alpha_;
}

Vector GpModel::posterior_mean_grad(PointRef x) const {
  require_dim(x.size(), dim(), "posterior_mean_grad");
  if (size() == 0) return Vector::Zero(dim());
  return kernel().grad_x_rows(x, data_.X).transpose() * alpha_;
}

GpModel GpModel::fantasy_update(const Matrix& z, const Vector& yz) const {
  if (z.rows() != yz.size()) throw DimensionError("fantasy_update: Z rows and y length differ");
  if (z.rows() == 0) return *this;
  require_finite(yz, "fantasy observations");
  return GpModel(cov_.condition_inputs_only(z), data_.appended(z, yz));
}

// ---------------------------------------------------------------------------
// Sample paths

GpPath::GpPath(KernelSpec kernel, Matrix frequencies, Vector phases, Vector weights)
    : kernel_(std::move(kernel)),
      frequencies_(std::move(frequencies)),
      phases_(std::move(phases)),
      weights_(std::move(weights)) {
  if (frequencies_.rows() != phases_.size() || phases_.size() != weights_.size())
    throw DimensionError("GpPath: feature arrays disagree in length");
  require_dim(frequencies_.cols(), kernel_.dim(), "GpPath frequencies");
  scale_ = std::sqrt(2.0 * kernel_.signal_variance() / static_cast<double>(phases_.size()));
}

double GpPath::value(PointRef x) const {
  require_dim(x.size(), dim(), "GpPath::value");
  const Vector arg = frequencies_ * x + phases_;
  return scale_ * weights_.dot(arg.array().cos().matrix());
}

Vector GpPath::gradient(PointRef x) const {
  require_dim(x.size(), dim(), "GpPath::gradient");
  const Vector arg = frequencies_ * x + phases_;
  const Vector c = weights_.cwiseProduct(arg.array().sin().matrix());
  return -scale_ * frequencies_.transpose() * c;
}

Matrix GpPath::hessian(PointRef x) const {
  require_dim(x.size(), dim(), "GpPath::hessian");
  const Vector arg = frequencies_ * x + phases_;
  const Vector c = weights_.cwiseProduct(arg.array().cos().matrix());
  return -scale_ * frequencies_.transpose() * c.asDiagonal() * frequencies_;
}

GpPath sample_prior_path(const KernelSpec& kernel, int num_features, std::uint64_t seed) {
  if (num_features < 1) throw InvalidArgument("sample_prior_path: num_features must be >= 1");
  const int d = kernel.dim();
  Rng rng(seed);
  Matrix freq(num_features, d);
  Vector phases(num_features);
  Vector weights(num_features);
  for (int i = 0; i < num_features; ++i) {
    double radial = 1.0;
    if (kernel.family() == KernelFamily::matern52) {
      // Student-t spectral density with 2 nu = 5 degrees of freedom.
      radial = std::sqrt(2.5 / rng.gamma(2.5));
    }
    for (int c = 0; c < d; ++c) freq(i, c) = rng.normal() * radial / kernel.lengthscales()[c];
    phases[i] = rng.uniform(0.0, 2.0 * std::numbers::pi);
    weights[i] = rng.normal();
  }
  return GpPath(kernel, std::move(freq), std::move(phases), std::move(weights));
}

Matrix sample_posterior_paths(const GpModel& model, const Matrix& probe, int count, std::uint64_t seed) {
  if (count < 1) throw InvalidArgument("sample_posterior_paths: count must be >= 1");
  require_dim(probe.cols(), model.dim(), "sample_posterior_paths");
  const Vector mean = model.posterior_means(probe);
  const Matrix cov = model.posterior_cov(probe, probe);
  const Matrix chol = robust_cholesky(0.5 * (cov + cov.transpose()), model.kernel().signal_variance());
  Rng rng(seed);
  const Matrix eps = rng.normal_matrix(count, probe.rows());
  Matrix out = eps * chol.transpose();
  out.rowwise() += mean.transpose();
  return out;
}

}  // namespace localbo
