#include "localbo/inner_opt.hpp"

#include "localbo/random.hpp"

#include <boost/random/sobol.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace localbo {

namespace {

constexpr int kMaxSobolDim = 3667;
constexpr int kMaxBacktracks = 40;
constexpr int kMaxStalls = 3;

struct RestartResult {
  Vector x;
  double f = std::numeric_limits<double>::infinity();
  bool converged = false;
  long evaluations = 0;
};

/// Central differences with each probe clipped into the box (one-sided at a
/// bound).
Vector fd_gradient(const ObjectiveFn& f, const Vector& x, double fx, const Box& box, double rel_step,
                   long& evaluations) {
  Vector g(x.size());
  Vector probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = rel_step * (box.upper()[i] - box.lower()[i]);
    const bool can_up = x[i] + h <= box.upper()[i];
    const bool can_down = x[i] - h >= box.lower()[i];
    if (can_up && can_down) {
      probe[i] = x[i] + h;
      const double fp = f(probe);
      probe[i] = x[i] - h;
      const double fm = f(probe);
      evaluations += 2;
      g[i] = (fp - fm) / (2.0 * h);
    } else if (can_up) {
      probe[i] = x[i] + h;
      g[i] = (f(probe) - fx) / h;
      ++evaluations;
    } else if (can_down) {
      probe[i] = x[i] - h;
      g[i] = (fx - f(probe)) / h;
      ++evaluations;
    } else {
      g[i] = 0.0;
    }
    probe[i] = x[i];
  }
  return g;
}

Vector projected_gradient(const Vector& x, const Vector& g, const Box& box) {
  Vector pg = g;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if ((x[i] <= box.lower()[i] && g[i] > 0.0) || (x[i] >= box.upper()[i] && g[i] < 0.0)) pg[i] = 0.0;
  }
  return pg;
}

/// Projected BFGS from a single start.
RestartResult descend(const ValueGradFn& fg, const Box& box, const Vector& start, const OptOptions& opts) {
  RestartResult res;
  const Eigen::Index n = start.size();
  Vector x = box.project(start);
  Vector g(n);
  double f = fg(x, g);
  ++res.evaluations;
  res.x = x;
  res.f = f;
  if (!std::isfinite(f) || !g.allFinite()) {
    res.f = std::numeric_limits<double>::infinity();
    return res;
  }
  const Vector width = box.width();
  Matrix h_inv = Matrix::Identity(n, n);
  bool identity_scaled = true;
  {
    const double gmax = g.cwiseAbs().maxCoeff();
    const double step = 0.1 * width.minCoeff();
    h_inv *= gmax > 0.0 ? step / gmax : 1.0;
  }
  int stalls = 0;
  Vector x_new(n), g_new(n), dir(n);
  for (int it = 0; it < opts.max_iterations; ++it) {
    const Vector pg = projected_gradient(x, g, box);
    if (pg.cwiseAbs().maxCoeff() < opts.gradient_tolerance) {
      res.converged = true;
      break;
    }
    // Active bounds are frozen for this step.
    std::vector<Eigen::Index> free;
    free.reserve(static_cast<size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i)
      if (pg[i] != 0.0 || g[i] == 0.0) free.push_back(i);
    dir.setZero();
    for (Eigen::Index a : free) {
      double s = 0.0;
      for (Eigen::Index b : free) s -= h_inv(a, b) * g[b];
      dir[a] = s;
    }
    double slope = g.dot(dir);
    if (!(slope < 0.0)) {
      const double gmax = pg.cwiseAbs().maxCoeff();
      h_inv = Matrix::Identity(n, n) * (0.1 * width.minCoeff() / gmax);
      identity_scaled = true;
      dir = -h_inv * pg;
      slope = g.dot(dir);
    }
    double step = 1.0;
    bool accepted = false;
    double f_new = f;
    for (int bt = 0; bt < kMaxBacktracks; ++bt) {
      x_new = box.project(x + step * dir);
      f_new = fg(x_new, g_new);
      ++res.evaluations;
      const double decrease = g.dot(x_new - x);
      if (std::isfinite(f_new) && g_new.allFinite() && f_new <= f + 1e-4 * std::min(decrease, 0.0)) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      if (!identity_scaled) {
        const double gmax = pg.cwiseAbs().maxCoeff();
        h_inv = Matrix::Identity(n, n) * (0.1 * width.minCoeff() / gmax);
        identity_scaled = true;
        continue;
      }
      break;
    }
    const Vector s = x_new - x;
    const Vector y = g_new - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm() && sy > 0.0) {
      if (identity_scaled) {
        h_inv = Matrix::Identity(n, n) * (sy / y.squaredNorm());
        identity_scaled = false;
      }
      const double rho = 1.0 / sy;
      const Vector hy = h_inv * y;
      // H+ = (I - rho s y^T) H (I - rho y s^T) + rho s s^T, expanded.
      h_inv.noalias() += (rho * rho * y.dot(hy) + rho) * s * s.transpose();
      h_inv.noalias() -= rho * (hy * s.transpose() + s * hy.transpose());
    }
    const double change = f - f_new;
    x = x_new;
    g = g_new;
    f = f_new;
    if (change <= 1e-15 * std::max(1.0, std::abs(f))) {
      if (++stalls >= kMaxStalls) break;
    } else {
      stalls = 0;
    }
  }
  res.x = x;
  res.f = f;
  return res;
}

/// Lower value wins; equal values go to the point nearer the reference, then
/// the lexicographically smaller point.
bool better(const RestartResult& a, const RestartResult& b, const std::optional<Vector>& ref) {
  if (a.f != b.f) return a.f < b.f;
  if (ref) {
    const double da = (a.x - *ref).squaredNorm();
    const double db = (b.x - *ref).squaredNorm();
    if (da != db) return da < db;
  }
  return std::lexicographical_compare(a.x.data(), a.x.data() + a.x.size(), b.x.data(),
                                      b.x.data() + b.x.size());
}

OptReport run_starts(const ValueGradFn& fg, const Box& box, const OptOptions& opts) {
  if (opts.restarts < 0) throw InvalidArgument("minimize: restarts must be >= 0");
  if (opts.max_iterations < 0) throw InvalidArgument("minimize: max_iterations must be >= 0");
  std::vector<Vector> starts;
  for (const Vector& w : opts.warm_starts) {
    require_dim(w.size(), box.dim(), "minimize warm start");
    starts.push_back(box.project(w));
  }
  const int fill = std::max(opts.restarts - static_cast<int>(starts.size()),
                            starts.empty() ? 1 : 0);
  if (fill > 0) {
    const Matrix u = scrambled_sobol(fill, box.dim(), opts.seed);
    for (int i = 0; i < fill; ++i) starts.push_back(box.from_unit(u.row(i).transpose()));
  }
  std::optional<Vector> ref = opts.reference;
  if (!ref && !opts.warm_starts.empty()) ref = starts.front();

  OptReport report;
  std::optional<RestartResult> best;
  for (const Vector& s : starts) {
    RestartResult r = descend(fg, box, s, opts);
    report.converged.push_back(r.converged);
    report.evaluations += r.evaluations;
    if (!std::isfinite(r.f)) continue;
    if (!best || better(r, *best, ref)) best = std::move(r);
  }
  report.restarts_used = static_cast<int>(starts.size());
  if (!best) throw OptFailure("minimize: all " + std::to_string(starts.size()) + " restarts produced non-finite values");
  report.x_star = best->x;
  report.f_star = best->f;
  return report;
}

}  // namespace

Matrix scrambled_sobol(int count, int dim, std::uint64_t seed) {
  Matrix out(count, dim);
  if (count == 0) return out;
  Rng rng(derive_seed(seed, 0x50B01));
  Vector shift(dim);
  for (int c = 0; c < dim; ++c) shift[c] = rng.uniform();
  if (dim > kMaxSobolDim) {
    for (int i = 0; i < count; ++i)
      for (int c = 0; c < dim; ++c) out(i, c) = rng.uniform();
    return out;
  }
  boost::random::sobol gen(static_cast<unsigned>(dim));
  gen.discard(static_cast<std::uintmax_t>(dim));  // skip the origin
  const double denom = static_cast<double>(gen.max()) + 1.0;
  for (int i = 0; i < count; ++i) {
    for (int c = 0; c < dim; ++c) {
      double u = static_cast<double>(gen()) / denom + shift[c];
      out(i, c) = u - std::floor(u);
    }
  }
  return out;
}

Vector flatten_rows(const Matrix& z) {
  Vector v(z.size());
  for (Eigen::Index i = 0; i < z.rows(); ++i)
    for (Eigen::Index c = 0; c < z.cols(); ++c) v[i * z.cols() + c] = z(i, c);
  return v;
}

Matrix unflatten_rows(const Vector& v, int rows, int cols) {
  require_dim(v.size(), static_cast<Eigen::Index>(rows) * cols, "unflatten_rows");
  Matrix z(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int c = 0; c < cols; ++c) z(i, c) = v[i * cols + c];
  return z;
}

OptReport minimize(const ValueGradFn& objective, const Box& box, const OptOptions& options) {
  return run_starts(objective, box, options);
}

OptReport minimize(const ObjectiveFn& objective, const Box& box, const OptOptions& options) {
  long fd_evals = 0;
  ValueGradFn fg = [&](const Vector& x, Vector& g) {
    const double fx = objective(x);
    if (std::isfinite(fx)) {
      g = fd_gradient(objective, x, fx, box, options.fd_relative_step, fd_evals);
    } else {
      g = Vector::Zero(x.size());
    }
    return fx;
  };
  OptReport report = run_starts(fg, box, options);
  report.evaluations += fd_evals;
  return report;
}

namespace {

Box product_box(const Box& row_box, int rows) {
  const int d = row_box.dim();
  Vector lo(static_cast<Eigen::Index>(rows) * d), hi(static_cast<Eigen::Index>(rows) * d);
  for (int i = 0; i < rows; ++i) {
    lo.segment(i * d, d) = row_box.lower();
    hi.segment(i * d, d) = row_box.upper();
  }
  return Box(lo, hi);
}

OptOptions flattened_options(const OptOptions& options, const std::vector<Matrix>& warm, int rows, int d) {
  OptOptions o = options;
  o.warm_starts.clear();
  for (const Matrix& w : warm) {
    if (w.rows() != rows || w.cols() != d) throw DimensionError("minimize_matrix: warm start has wrong shape");
    o.warm_starts.push_back(flatten_rows(w));
  }
  if (o.reference && o.reference->size() != static_cast<Eigen::Index>(rows) * d) o.reference.reset();
  return o;
}

MatrixOptReport to_matrix_report(const OptReport& r, int rows, int d) {
  MatrixOptReport out;
  out.z_star = unflatten_rows(r.x_star, rows, d);
  out.value = r.f_star;
  out.restarts_used = r.restarts_used;
  out.converged = r.converged;
  out.evaluations = r.evaluations;
  return out;
}

}  // namespace

MatrixOptReport minimize_matrix(const MatrixObjectiveFn& objective, const Box& row_box, int rows,
                                const OptOptions& options, const std::vector<Matrix>& warm_starts) {
  if (rows < 1) throw InvalidArgument("minimize_matrix: rows must be >= 1");
  const int d = row_box.dim();
  ObjectiveFn flat = [&](const Vector& v) { return objective(unflatten_rows(v, rows, d)); };
  return to_matrix_report(minimize(flat, product_box(row_box, rows), flattened_options(options, warm_starts, rows, d)),
                          rows, d);
}

MatrixOptReport minimize_matrix(const MatrixValueGradFn& objective, const Box& row_box, int rows,
                                const OptOptions& options, const std::vector<Matrix>& warm_starts) {
  if (rows < 1) throw InvalidArgument("minimize_matrix: rows must be >= 1");
  const int d = row_box.dim();
  ValueGradFn flat = [&](const Vector& v, Vector& g) {
    Matrix gm(rows, d);
    const double f = objective(unflatten_rows(v, rows, d), gm);
    g = flatten_rows(gm);
    return f;
  };
  return to_matrix_report(minimize(flat, product_box(row_box, rows), flattened_options(options, warm_starts, rows, d)),
                          rows, d);
}

}  // namespace localbo
