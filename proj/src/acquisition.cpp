#include "localbo/acquisition.hpp"

#include "localbo/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace localbo {

namespace {

// Variances below this are treated as zero when differentiating sqrt(v).
constexpr double kVarianceFloor = 1e-18;

Eigen::LLT<Matrix> factor_or_throw(Matrix s, double scale) {
  Eigen::LLT<Matrix> llt(s);
  if (llt.info() == Eigen::Success) return llt;
  double jitter = 0.0;
  robust_cholesky(s, scale, &jitter);
  s.diagonal().array() += jitter;
  return Eigen::LLT<Matrix>(s);
}

// Posterior covariance of Z given the view's inputs, plus observation noise.
Matrix schur_block(const VarianceView& view, const Matrix& z, const Matrix& kxz, const Matrix& q) {
  Matrix s = view.kernel().gram(z);
  s.diagonal().array() += view.noise_sigma() * view.noise_sigma() + view.jitter();
  if (view.size() > 0) s.noalias() -= kxz.transpose() * q;
  return 0.5 * (s + s.transpose());
}

}  // namespace

double ucb(const GpModel& model, PointRef x, const UcbParams& params) {
  return model.posterior_mean(x) + params.beta * model.posterior_sd(x);
}

double ucb_with_gradient(const GpModel& model, PointRef x, const UcbParams& params, Vector& grad) {
  const double var = model.posterior_var(x);
  const double sd = std::sqrt(var);
  grad = model.posterior_mean_grad(x);
  if (var > kVarianceFloor) grad += (params.beta / (2.0 * sd)) * model.posterior_var_grad(x);
  return model.posterior_mean(x) + params.beta * sd;
}

double alpha_trace(const VarianceView& view, PointRef x_t, const Matrix& z) {
  return view.condition_inputs_only(z).grad_cov(x_t).trace();
}

double alpha_trace(const GpModel& model, PointRef x_t, const Matrix& z) {
  return alpha_trace(model.covariance(), x_t, z);
}

// ---------------------------------------------------------------------------
// AlphaTraceObjective
//
// With C = G(x_t, Z) - J^T K^-1 k(X, Z) and S the noisy posterior covariance
// of Z, alpha = tr(Sigma_D) - tr(C S^-1 C^T).

AlphaTraceObjective::AlphaTraceObjective(const VarianceView& view, PointRef x_t)
    : view_(&view), x_t_(x_t) {
  require_dim(x_t.size(), view.dim(), "alpha_trace x_t");
  base_trace_ = view.grad_cov(x_t_).trace();
  grad_rows_ = view.kernel().grad_x_rows(x_t_, view.inputs());
  solved_grads_ = view.solve(grad_rows_);
}

double AlphaTraceObjective::value(const Matrix& z) const { return evaluate(z, nullptr); }

double AlphaTraceObjective::value_and_gradient(const Matrix& z, Matrix& grad) const {
  return evaluate(z, &grad);
}

double AlphaTraceObjective::evaluate(const Matrix& z, Matrix* grad) const {
  const VarianceView& view = *view_;
  const KernelSpec& kernel = view.kernel();
  const int d = view.dim();
  const Eigen::Index b = z.rows();
  if (b == 0) {
    if (grad) grad->resize(0, d);
    return base_trace_;
  }
  require_dim(z.cols(), d, "alpha_trace Z");
  const Matrix& x = view.inputs();
  const bool has_data = view.size() > 0;

  Matrix kxz = has_data ? kernel.gram(x, z) : Matrix(0, b);
  Matrix q = view.solve(kxz);
  Matrix c = kernel.grad_x_rows(x_t_, z).transpose();
  if (has_data) c.noalias() -= solved_grads_.transpose() * kxz;
  const Eigen::LLT<Matrix> llt = factor_or_throw(schur_block(view, z, kxz, q), kernel.signal_variance());
  const Matrix w = llt.solve(Matrix(c.transpose()));  // b x d
  const double reduction = c.cwiseProduct(w.transpose()).sum();

  if (grad) {
    grad->resize(b, d);
    const Matrix m = w * w.transpose();
    for (Eigen::Index j = 0; j < b; ++j) {
      const Vector zj = z.row(j).transpose();
      Matrix dc = kernel.cross_hessian(x_t_, zj);
      Matrix ds = kernel.grad_x_rows(zj, z);  // rows: d k(z_j, z_l) / d z_j
      if (has_data) {
        const Matrix p = kernel.grad_x_rows(zj, x);
        dc.noalias() -= solved_grads_.transpose() * p;
        ds.noalias() -= q.transpose() * p;
      }
      const Vector term_c = 2.0 * dc.transpose() * w.row(j).transpose();
      const Vector term_s = 2.0 * ds.transpose() * m.col(j);
      grad->row(j) = -(term_c - term_s).transpose();
    }
  }
  return base_trace_ - reduction;
}

// ---------------------------------------------------------------------------
// Bounds

double quadratic_upper_bound(double f0, PointRef grad, double lipschitz, PointRef x0, PointRef x) {
  require_dim(grad.size(), x0.size(), "quadratic bound gradient");
  require_dim(x.size(), x0.size(), "quadratic bound point");
  const Vector step = x - x0;
  return f0 + grad.dot(step) + 0.5 * lipschitz * step.squaredNorm();
}

Vector quadratic_bound_minimizer(PointRef grad, double lipschitz, PointRef x0) {
  if (!(lipschitz > 0.0)) throw InvalidArgument("quadratic bound needs a positive Lipschitz constant");
  require_dim(grad.size(), x0.size(), "quadratic bound gradient");
  return x0 - grad / lipschitz;
}

double gibo_upper_bound(double f0, PointRef grad_true, PointRef grad_mu, double eta) {
  require_dim(grad_mu.size(), grad_true.size(), "gibo bound gradients");
  return f0 - 0.5 * eta * grad_true.squaredNorm() + 0.5 * eta * (grad_mu - grad_true).squaredNorm();
}

// ---------------------------------------------------------------------------
// Look-ahead

Matrix fantasy_normals(int num_fantasies, int batch, std::uint64_t seed) {
  if (num_fantasies < 1) throw InvalidArgument("lookahead needs at least one fantasy");
  if (batch < 1) throw InvalidArgument("lookahead batch must be >= 1");
  Rng rng(seed);
  return rng.normal_matrix(num_fantasies, batch);
}

LookaheadProblem::LookaheadProblem(const GpModel& model, double beta, Matrix normals)
    : model_(&model), beta_(beta), normals_(std::move(normals)) {
  if (normals_.rows() < 1 || normals_.cols() < 1)
    throw InvalidArgument("lookahead normals must be non-empty");
}

Matrix LookaheadProblem::fantasy_observations(const Matrix& z) const {
  require_dim(z.rows(), batch(), "fantasy batch size");
  require_dim(z.cols(), model_->dim(), "fantasy inputs");
  const VarianceView& view = model_->covariance();
  const Matrix kxz = view.size() > 0 ? view.kernel().gram(view.inputs(), z) : Matrix(0, z.rows());
  const Matrix q = view.solve(kxz);
  const Eigen::LLT<Matrix> llt = factor_or_throw(schur_block(view, z, kxz, q), view.kernel().signal_variance());
  const Matrix l = llt.matrixL();
  Matrix y = normals_ * l.transpose();
  y.rowwise() += model_->posterior_means(z).transpose();
  return y;
}

double LookaheadProblem::one_shot_value(const Matrix& z, const Matrix& inner, Matrix* grad_z,
                                        Matrix* grad_inner) const {
  const GpModel& model = *model_;
  const VarianceView& view = model.covariance();
  const KernelSpec& kernel = model.kernel();
  const int d = model.dim();
  const int b = batch();
  const int nf = num_fantasies();
  require_dim(z.rows(), b, "one-shot batch size");
  require_dim(z.cols(), d, "one-shot Z");
  require_dim(inner.rows(), nf, "one-shot inner points");
  require_dim(inner.cols(), d, "one-shot inner points");
  const Matrix& x = view.inputs();
  const bool has_data = view.size() > 0;
  const double prior = kernel.signal_variance();

  const Matrix kxz = has_data ? kernel.gram(x, z) : Matrix(0, b);
  const Matrix q = view.solve(kxz);
  const Eigen::LLT<Matrix> llt = factor_or_throw(schur_block(view, z, kxz, q), prior);
  const Matrix l = llt.matrixL();
  const auto lower = l.triangularView<Eigen::Lower>();
  const auto upper = l.transpose().triangularView<Eigen::Upper>();

  // Per-fantasy quantities kept for the Z gradient.
  Matrix u_all(b, nf), s_all(b, nf), w_all(b, nf), r_all(view.size(), nf), gz_all(b * nf, d);
  Vector sd_all(nf);
  double total = 0.0;
  if (grad_inner) grad_inner->setZero(nf, d);

  for (int f = 0; f < nf; ++f) {
    const Vector xf = inner.row(f).transpose();
    const Vector eps = normals_.row(f).transpose();
    const Vector kx = kernel.cross(xf, x);
    const Vector r = view.solve(kx);
    const double mu = has_data ? kx.dot(model.alpha()) : 0.0;
    const double var_d = std::clamp(prior - kx.dot(r), 0.0, prior);
    Vector a = kernel.cross(xf, z);
    if (has_data) a.noalias() -= q.transpose() * kx;
    const Vector u = lower.solve(a);
    const Vector w = upper.solve(eps);
    const Vector s = upper.solve(u);
    const double v = std::max(var_d - u.squaredNorm(), 0.0);
    const double sd = std::sqrt(v);
    total += mu + u.dot(eps) + beta_ * sd;

    u_all.col(f) = u;
    s_all.col(f) = s;
    w_all.col(f) = w;
    if (has_data) r_all.col(f) = r;
    sd_all[f] = sd;
    const Matrix gz = kernel.grad_x_rows(xf, z);  // rows: d k(x_f, z_j) / d x_f
    gz_all.middleRows(static_cast<Eigen::Index>(f) * b, b) = gz;

    if (grad_inner) {
      const Matrix jf = kernel.grad_x_rows(xf, x);
      Matrix ap = gz.transpose();
      if (has_data) ap.noalias() -= jf.transpose() * q;
      Vector g = ap * w;
      if (has_data) g.noalias() += jf.transpose() * model.alpha();
      if (v > kVarianceFloor) {
        Vector dv = -2.0 * ap * s;
        if (has_data) dv.noalias() -= 2.0 * jf.transpose() * r;
        g += (beta_ / (2.0 * sd)) * dv;
      }
      grad_inner->row(f) = g.transpose() / nf;
    }
  }

  if (grad_z) {
    grad_z->setZero(b, d);
    const Matrix eye = Matrix::Identity(b, b);
    for (int j = 0; j < b; ++j) {
      const Vector zj = z.row(j).transpose();
      Matrix ds = kernel.grad_x_rows(zj, z);  // row l: d k(z_j, z_l) / d z_j
      Matrix pr(d, nf);                        // P_j^T r_f
      pr.setZero();
      if (has_data) {
        const Matrix p = kernel.grad_x_rows(zj, x);
        ds.noalias() -= q.transpose() * p;
        pr.noalias() = p.transpose() * r_all;
      }
      const Vector pj = lower.solve(Vector(eye.col(j)));
      for (int c = 0; c < d; ++c) {
        // dS = e_j g^T + g e_j^T with g_j holding half the diagonal entry.
        Vector g = ds.col(c);
        const Vector qg = lower.solve(g);
        Matrix phi = pj * qg.transpose() + qg * pj.transpose();
        phi.diagonal() *= 0.5;
        phi.triangularView<Eigen::StrictlyUpper>().setZero();
        double acc = 0.0;
        for (int f = 0; f < nf; ++f) {
          const double da = -gz_all(static_cast<Eigen::Index>(f) * b + j, c) - pr(c, f);
          const Vector eps = normals_.row(f).transpose();
          double dval = da * w_all(j, f) - eps.dot(phi * u_all.col(f));
          if (sd_all[f] * sd_all[f] > kVarianceFloor) {
            const double sj = s_all(j, f);
            const double dv = -2.0 * da * sj + 2.0 * sj * g.dot(s_all.col(f));
            dval += beta_ * dv / (2.0 * sd_all[f]);
          }
          acc += dval;
        }
        (*grad_z)(j, c) = acc / nf;
      }
    }
  }
  return total / nf;
}

OptReport minimize_ucb(const GpModel& model, const UcbParams& params, const Box& box,
                       const OptOptions& options) {
  const ValueGradFn fn = [&](const Vector& x, Vector& g) { return ucb_with_gradient(model, x, params, g); };
  return minimize(fn, box, options);
}

double lookahead_value(const GpModel& model, const Matrix& z, const UcbParams& params,
                       const LookaheadConfig& cfg, const Box& box, const OptOptions& inner) {
  require_dim(box.dim(), model.dim(), "lookahead box");
  const LookaheadProblem problem(model, params.beta, fantasy_normals(cfg.num_fantasies, static_cast<int>(z.rows()), cfg.seed));
  const Matrix ys = problem.fantasy_observations(z);
  double total = 0.0;
  for (int f = 0; f < problem.num_fantasies(); ++f) {
    const GpModel fantasy = model.fantasy_update(z, ys.row(f).transpose());
    OptOptions opts = inner;
    opts.restarts = cfg.inner_restarts;
    opts.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(f) + 1);
    for (Eigen::Index j = 0; j < z.rows(); ++j) opts.warm_starts.push_back(z.row(j).transpose());
    total += minimize_ucb(fantasy, params, box, opts).f_star;
  }
  return total / problem.num_fantasies();
}

double lookahead_value_on_grid(const GpModel& model, const Matrix& z, const UcbParams& params,
                               const LookaheadConfig& cfg, const Matrix& grid) {
  require_dim(grid.cols(), model.dim(), "lookahead grid");
  if (grid.rows() == 0) throw InvalidArgument("lookahead grid is empty");
  const LookaheadProblem problem(model, params.beta, fantasy_normals(cfg.num_fantasies, static_cast<int>(z.rows()), cfg.seed));
  const Matrix ys = problem.fantasy_observations(z);
  double total = 0.0;
  for (int f = 0; f < problem.num_fantasies(); ++f) {
    const GpModel fantasy = model.fantasy_update(z, ys.row(f).transpose());
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < grid.rows(); ++i) best = std::min(best, ucb(fantasy, grid.row(i).transpose(), params));
    total += best;
  }
  return total / problem.num_fantasies();
}

LookaheadResult optimize_lookahead(const GpModel& model, int batch, const UcbParams& params,
                                   const LookaheadConfig& cfg, const Box& box, PointRef anchor,
                                   const OptOptions& options, double perturbation_scale) {
  require_dim(box.dim(), model.dim(), "lookahead box");
  require_dim(anchor.size(), model.dim(), "lookahead anchor");
  const LookaheadProblem problem(model, params.beta, fantasy_normals(cfg.num_fantasies, batch, cfg.seed));
  const int nf = problem.num_fantasies();
  const int rows = batch + nf;
  const int d = model.dim();

  const MatrixValueGradFn fn = [&](const Matrix& m, Matrix& g) {
    Matrix gz, gi;
    const double v = problem.one_shot_value(m.topRows(batch), m.bottomRows(nf), &gz, &gi);
    g.resize(rows, d);
    g.topRows(batch) = gz;
    g.bottomRows(nf) = gi;
    return v;
  };

  // Warm starts: the batch scattered around the anchor, inner points near it.
  Rng rng(derive_seed(options.seed, 0x10ca1));
  std::vector<Matrix> warm;
  for (int k = 0; k < 2; ++k) {
    Matrix start(rows, d);
    for (int i = 0; i < rows; ++i) {
      const double scale = i < batch ? perturbation_scale : 0.1 * perturbation_scale;
      Vector p = anchor + scale * rng.normal_vector(d);
      start.row(i) = box.project(p).transpose();
    }
    warm.push_back(std::move(start));
  }
  OptOptions opts = options;
  opts.warm_starts.clear();
  const MatrixOptReport rep = minimize_matrix(fn, box, rows, opts, warm);
  LookaheadResult out;
  out.z = rep.z_star.topRows(batch);
  out.inner = rep.z_star.bottomRows(nf);
  out.value = rep.value;
  return out;
}

}  // namespace localbo
