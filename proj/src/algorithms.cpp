#include "localbo/algorithms.hpp"

#include "localbo/random.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>

namespace localbo {

namespace {

// Stream tags for the seeds derived inside one run.
constexpr std::uint64_t kQueryStream = 0x7175657279ULL;
constexpr std::uint64_t kExploreStream = 0x6578706cULL;
constexpr std::uint64_t kExploitStream = 0x6578706fULL;
constexpr std::uint64_t kFantasyStream = 0x66616e74ULL;

enum class Exploration { trace, lookahead };
enum class Exploitation { gradient_step, min_ucb };

struct LoopSpec {
  std::string name;
  Exploration explore = Exploration::trace;
  Exploitation exploit = Exploitation::min_ucb;
  double eta = 0.0;
  bool eta_decay = false;
  bool evaluate_next = false;
  LookaheadConfig lookahead;
};

class RunState {
 public:
  RunState(const Objective& objective, const LocalOptions& opts, std::uint64_t seed, long budget)
      : objective_(objective), opts_(opts), seed_(seed), budget_(budget), data_(objective.dim(), opts.model_noise) {
    start_ = std::chrono::steady_clock::now();
  }

  long remaining() const { return budget_ - n_; }
  long n() const { return n_; }
  const Dataset& data() const { return data_; }

  /// Evaluates the rows of q (already truncated to the budget) and appends them.
  void evaluate(const Matrix& q, int t, IterationRecord& rec) {
    const Eigen::Index m = q.rows();
    Vector y(m), truth(objective_.has_true_value() ? m : 0);
    for (Eigen::Index i = 0; i < m; ++i) {
      const Vector x = q.row(i).transpose();
      try {
        y[i] = objective_.eval_noisy(x, query_seed(seed_, n_ + i));
      } catch (const DomainError& e) {
        throw DomainError("iteration " + std::to_string(t) + ": " + e.what());
      } catch (const std::exception& e) {
        throw std::runtime_error("iteration " + std::to_string(t) + ": objective failed: " + e.what());
      }
      if (objective_.has_true_value()) truth[i] = objective_.true_value(x);
    }
    Vector internal(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      internal[i] = objective_.to_internal(y[i]);
      if (!std::isfinite(internal[i])) throw std::runtime_error("iteration " + std::to_string(t) + ": non-finite observation");
      if (internal[i] < best_internal_) {
        best_internal_ = internal[i];
        best_x_ = q.row(i).transpose();
      }
    }
    data_ = data_.appended(q, internal);
    n_ += m;
    append_rows(rec.queried, q);
    append_values(rec.observed, y);
    append_values(rec.true_values, truth);
  }

  bool has_best() const { return best_x_.size() > 0; }
  const Vector& best_x() const { return best_x_; }
  double best_user() const { return objective_.from_internal(best_internal_); }
  double elapsed() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  static void append_rows(Matrix& m, const Matrix& rows) {
    if (rows.rows() == 0) return;
    Matrix out(m.rows() + rows.rows(), rows.cols());
    if (m.rows() > 0) out.topRows(m.rows()) = m;
    out.bottomRows(rows.rows()) = rows;
    m = std::move(out);
  }
  static void append_values(Vector& v, const Vector& more) {
    if (more.size() == 0) return;
    Vector out(v.size() + more.size());
    out << v, more;
    v = std::move(out);
  }

  const Objective& objective_;
  const LocalOptions& opts_;
  std::uint64_t seed_;
  long budget_;
  long n_ = 0;
  Dataset data_;
  double best_internal_ = std::numeric_limits<double>::infinity();
  Vector best_x_;
  std::chrono::steady_clock::time_point start_;
};

Matrix truncate_rows(const Matrix& m, long keep) {
  if (keep >= m.rows()) return m;
  return m.topRows(std::max<long>(keep, 0));
}

double mean_lengthscale(const KernelSpec& k) { return k.lengthscales().mean(); }

Matrix trace_exploration(const GpModel& model, const Vector& x_t, int b1, int b2, const LocalOptions& opts,
                         const Box& box, std::uint64_t seed) {
  const int d = model.dim();
  Matrix batch(b1 + b2, d);
  for (int i = 0; i < b1; ++i) batch.row(i) = x_t.transpose();
  if (b2 == 0) return batch;
  // The resampled copies are known inputs when choosing the rest.
  const VarianceView view = model.covariance().condition_inputs_only(batch.topRows(b1));
  const AlphaTraceObjective objective(view, x_t);
  const MatrixValueGradFn fn = [&](const Matrix& z, Matrix& g) { return objective.value_and_gradient(z, g); };
  OptOptions o = opts.explore_opt;
  o.seed = seed;
  Rng rng(derive_seed(seed, 1));
  Matrix warm(b2, d);
  const double scale = opts.perturbation * mean_lengthscale(model.kernel());
  for (int i = 0; i < b2; ++i) warm.row(i) = box.project(x_t + scale * rng.normal_vector(d)).transpose();
  const MatrixOptReport rep = minimize_matrix(fn, box, b2, o, {warm});
  batch.bottomRows(b2) = rep.z_star;
  return batch;
}

Vector minimize_ucb_step(const GpModel& model, double beta, const Vector& x_t, const RunState& state,
                         const LocalOptions& opts, const Box& box, std::uint64_t seed) {
  OptOptions o = opts.exploit_opt;
  o.seed = seed;
  o.warm_starts.insert(o.warm_starts.begin(), x_t);
  if (state.has_best()) o.warm_starts.insert(o.warm_starts.begin() + 1, state.best_x());
  o.reference = x_t;
  return minimize_ucb(model, UcbParams{beta}, box, o).x_star;
}

RunTrace run_loop(const Objective& objective, PointRef x1, const LocalOptions& opts, const LoopSpec& spec,
                  long budget, std::uint64_t seed) {
  const Box& box = objective.box();
  const int d = objective.dim();
  require_dim(x1.size(), d, "starting point");
  require_dim(opts.kernel.dim(), d, "model kernel");
  if (!box.contains(x1, 1e-12)) throw DomainError(spec.name + ": starting point outside the domain box");
  if (budget < 0) throw InvalidArgument("budget must be nonnegative");

  RunTrace trace;
  trace.algorithm = spec.name;
  trace.seed = seed;
  trace.sense = objective.sense();
  RunState state(objective, opts, seed, budget);
  Vector x_t = x1;
  GpModel model = fit(opts.kernel, state.data());

  for (int t = 1; state.remaining() > 0; ++t) {
    if (opts.max_iterations > 0 && t > opts.max_iterations) break;
    IterationRecord rec;
    rec.t = t;
    rec.x_t = x_t;
    rec.beta = opts.schedule.beta_at(t);
    rec.queried.resize(0, d);
    const std::uint64_t it_seed = derive_seed(seed, static_cast<std::uint64_t>(t));

    Matrix batch;
    if (spec.explore == Exploration::trace) {
      rec.b1 = opts.schedule.b1_at(t);
      rec.b2 = opts.schedule.b2_at(t, d);
      batch = trace_exploration(model, x_t, rec.b1, rec.b2, opts, box, derive_seed(it_seed, kExploreStream));
    } else {
      const int b = opts.schedule.b_lookahead;
      rec.b2 = b;
      LookaheadConfig la = spec.lookahead;
      la.seed = derive_seed(derive_seed(spec.lookahead.seed, seed), static_cast<std::uint64_t>(t) ^ kFantasyStream);
      OptOptions o = opts.explore_opt;
      o.seed = derive_seed(it_seed, kExploreStream);
      batch = optimize_lookahead(model, b, UcbParams{rec.beta}, la, box, x_t, o,
                                 opts.perturbation * mean_lengthscale(opts.kernel))
                  .z;
    }
    batch = truncate_rows(batch, state.remaining());
    if (batch.rows() == 0 && opts.max_iterations == 0 && !spec.evaluate_next)
      throw InvalidArgument(spec.name + ": schedule produced an empty batch with no iteration limit");
    state.evaluate(batch, t, rec);
    model = fit(opts.kernel, state.data());

    Vector next;
    if (spec.exploit == Exploitation::gradient_step) {
      const double eta = spec.eta_decay ? spec.eta / t : spec.eta;
      next = box.project(x_t - eta * model.posterior_mean_grad(x_t));
    } else {
      next = minimize_ucb_step(model, rec.beta, x_t, state, opts, box, derive_seed(it_seed, kExploitStream));
    }
    if (spec.evaluate_next && state.remaining() > 0) {
      state.evaluate(next.transpose(), t, rec);
      model = fit(opts.kernel, state.data());
    }

    rec.incumbent_estimate = objective.from_internal(model.posterior_mean(x_t));
    if (objective.has_true_value()) rec.incumbent_true = objective.true_value(x_t);
    rec.best_observed = state.n() > 0 ? state.best_user() : std::numeric_limits<double>::quiet_NaN();
    rec.n = state.n();
    rec.wall_time = state.elapsed();
    trace.records.push_back(std::move(rec));
    x_t = next;
  }
  if (spec.evaluate_next && state.n() > 0) {
    // Final report: argmin of the UCB on all data.
    const double beta = opts.schedule.beta_at(static_cast<int>(trace.records.size()) + 1);
    x_t = minimize_ucb_step(model, beta, x_t, state, opts, box, derive_seed(seed, kExploitStream));
  }
  trace.x_final = x_t;
  return trace;
}

}  // namespace

std::string to_string(BatchMode mode) {
  switch (mode) {
    case BatchMode::fixed:
      return "fixed";
    case BatchMode::logsq:
      return "logsq";
    case BatchMode::linear:
      return "linear";
    case BatchMode::quadratic:
      return "quadratic";
  }
  return "unknown";
}

BatchMode batch_mode_from_string(const std::string& name) {
  if (name == "fixed") return BatchMode::fixed;
  if (name == "logsq") return BatchMode::logsq;
  if (name == "linear") return BatchMode::linear;
  if (name == "quadratic") return BatchMode::quadratic;
  throw InvalidArgument("unknown batch mode '" + name + "'");
}

double ScheduleSpec::beta_at(int t) const {
  if (beta_mode == BetaMode::fixed) return beta;
  const double tt = static_cast<double>(std::max(t, 1));
  return std::sqrt(2.0 * std::log(std::numbers::pi * std::numbers::pi * tt * tt / delta));
}

namespace {

long growth(BatchMode mode, int t) {
  const double tt = static_cast<double>(std::max(t, 1));
  switch (mode) {
    case BatchMode::logsq: {
      const double l = std::log(tt);
      return std::max<long>(1, static_cast<long>(std::ceil(l * l)));
    }
    case BatchMode::linear:
      return t;
    case BatchMode::quadratic:
      return static_cast<long>(t) * t;
    case BatchMode::fixed:
      break;
  }
  return 0;
}

}  // namespace

int ScheduleSpec::b1_at(int t) const {
  if (b1_mode == BatchMode::fixed) return b1;
  return static_cast<int>(growth(b1_mode, t));
}

int ScheduleSpec::b2_at(int t, int dim) const {
  if (b2_mode == BatchMode::fixed) return b2;
  if (b2_mode == BatchMode::logsq) {
    const double l = std::log(static_cast<double>(std::max(t, 1)));
    return std::max(1, static_cast<int>(std::ceil(dim * l * l)));
  }
  return static_cast<int>(dim * growth(b2_mode, t));
}

std::uint64_t query_seed(std::uint64_t run_seed, long index) {
  return derive_seed(derive_seed(run_seed, kQueryStream), static_cast<std::uint64_t>(index));
}

RunTrace run_gibo(const Objective& objective, PointRef x1, const GiboConfig& cfg, long budget, std::uint64_t seed) {
  LoopSpec spec;
  spec.name = "gibo";
  spec.explore = Exploration::trace;
  spec.exploit = Exploitation::gradient_step;
  spec.eta = cfg.eta;
  spec.eta_decay = cfg.eta_decay;
  if (!(cfg.eta > 0.0)) throw InvalidArgument("gibo step size must be positive");
  LocalOptions opts = cfg.local;
  // Plain GIBO never resamples the incumbent.
  opts.schedule.b1_mode = BatchMode::fixed;
  opts.schedule.b1 = 0;
  return run_loop(objective, x1, opts, spec, budget, seed);
}

RunTrace run_minucb_gradient_step(const Objective& objective, PointRef x1, const GiboConfig& cfg, long budget,
                                  std::uint64_t seed) {
  LoopSpec spec;
  spec.name = "minucb_gradient_step";
  spec.explore = Exploration::trace;
  spec.exploit = Exploitation::gradient_step;
  spec.eta = cfg.eta;
  spec.eta_decay = cfg.eta_decay;
  if (!(cfg.eta > 0.0)) throw InvalidArgument("step size must be positive");
  return run_loop(objective, x1, cfg.local, spec, budget, seed);
}

RunTrace run_minucb(const Objective& objective, PointRef x1, const LocalOptions& cfg, long budget,
                    std::uint64_t seed) {
  LoopSpec spec;
  spec.name = "minucb";
  spec.explore = Exploration::trace;
  spec.exploit = Exploitation::min_ucb;
  return run_loop(objective, x1, cfg, spec, budget, seed);
}

RunTrace run_la_minucb(const Objective& objective, PointRef x1, const LaMinUcbConfig& cfg, long budget,
                       std::uint64_t seed) {
  if (cfg.local.schedule.b_lookahead < 1) throw InvalidArgument("look-ahead batch must be >= 1");
  LoopSpec spec;
  spec.name = "la_minucb";
  spec.explore = Exploration::lookahead;
  spec.exploit = Exploitation::min_ucb;
  spec.evaluate_next = true;
  spec.lookahead = cfg.lookahead;
  return run_loop(objective, x1, cfg.local, spec, budget, seed);
}

RunTrace run_random_search(const Objective& objective, long budget, std::uint64_t seed, long batch) {
  if (budget < 0) throw InvalidArgument("budget must be nonnegative");
  if (batch < 1) throw InvalidArgument("random search batch must be >= 1");
  const Box& box = objective.box();
  const int d = objective.dim();
  RunTrace trace;
  trace.algorithm = "random";
  trace.seed = seed;
  trace.sense = objective.sense();
  Rng rng(derive_seed(seed, kExploreStream));
  const auto start = std::chrono::steady_clock::now();
  double best_internal = std::numeric_limits<double>::infinity();
  Vector best_x = box.center();
  long n = 0;
  for (int t = 1; n < budget; ++t) {
    IterationRecord rec;
    rec.t = t;
    rec.x_t = best_x;
    const long m = std::min(batch, budget - n);
    rec.queried.resize(m, d);
    rec.observed.resize(m);
    if (objective.has_true_value()) rec.true_values.resize(m);
    for (long i = 0; i < m; ++i) {
      Vector u(d);
      for (int c = 0; c < d; ++c) u[c] = rng.uniform();
      const Vector x = box.from_unit(u);
      rec.queried.row(i) = x.transpose();
      rec.observed[i] = objective.eval_noisy(x, query_seed(seed, n + i));
      if (objective.has_true_value()) rec.true_values[i] = objective.true_value(x);
      const double v = objective.to_internal(rec.observed[i]);
      if (v < best_internal) {
        best_internal = v;
        best_x = x;
      }
    }
    n += m;
    rec.b2 = static_cast<int>(m);
    rec.n = n;
    rec.best_observed = objective.from_internal(best_internal);
    rec.incumbent_estimate = rec.best_observed;
    if (objective.has_true_value()) rec.incumbent_true = objective.true_value(best_x);
    rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    trace.records.push_back(std::move(rec));
  }
  trace.x_final = best_x;
  return trace;
}

std::vector<double> grad_norm_diagnostic(const RunTrace& trace, const Objective& objective) {
  if (!objective.has_true_gradient()) throw ContractViolation(objective.name() + " has no analytic gradient");
  std::vector<double> out;
  out.reserve(trace.records.size());
  for (const auto& rec : trace.records) out.push_back(objective.true_gradient(rec.x_t).norm());
  return out;
}

namespace {

Box error_function_box(const KernelSpec& kernel) {
  const Vector half = 3.0 * kernel.lengthscales();
  return Box(-half, half);
}

MatrixOptReport minimize_error_function(const AlphaTraceObjective& obj, const Box& box, int b, int restarts,
                                        std::uint64_t seed, const std::vector<Matrix>& warm) {
  const MatrixValueGradFn fn = [&](const Matrix& z, Matrix& g) { return obj.value_and_gradient(z, g); };
  OptOptions o;
  o.restarts = restarts;
  o.seed = seed;
  return minimize_matrix(fn, box, b, o, warm);
}

Matrix near_origin(const KernelSpec& kernel, int rows, Rng& rng) {
  Matrix z(rows, kernel.dim());
  for (int i = 0; i < rows; ++i)
    z.row(i) = (0.5 * rng.normal_vector(kernel.dim()).cwiseProduct(kernel.lengthscales())).transpose();
  return z;
}

}  // namespace

double error_function_estimate(const KernelSpec& kernel, double sigma, int b, int restarts, std::uint64_t seed) {
  if (b < 0) throw InvalidArgument("error function batch must be >= 0");
  const VarianceView prior(kernel, kernel.dim(), sigma);
  const Vector origin = Vector::Zero(kernel.dim());
  const AlphaTraceObjective obj(prior, origin);
  if (b == 0) return obj.base_trace();
  const Box box = error_function_box(kernel);
  Rng rng(derive_seed(seed, kExploreStream));
  const Matrix warm = box.dim() > 0 ? near_origin(kernel, b, rng) : Matrix();
  return minimize_error_function(obj, box, b, restarts, seed, {warm}).value;
}

std::vector<double> error_function_curve(const KernelSpec& kernel, double sigma, const std::vector<int>& sizes,
                                         int restarts, std::uint64_t seed) {
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (sizes[i] < 0) throw InvalidArgument("error function batch must be >= 0");
    if (i > 0 && sizes[i] < sizes[i - 1]) throw InvalidArgument("error function sizes must be nondecreasing");
  }
  const VarianceView prior(kernel, kernel.dim(), sigma);
  const Vector origin = Vector::Zero(kernel.dim());
  const AlphaTraceObjective obj(prior, origin);
  const Box box = error_function_box(kernel);
  Rng rng(derive_seed(seed, kExploreStream));
  std::vector<double> out;
  Matrix prev(0, kernel.dim());
  for (int b : sizes) {
    if (b == 0) {
      out.push_back(obj.base_trace());
      continue;
    }
    // Previous optimum plus fresh rows: extra inputs can only lower the trace.
    Matrix warm(b, kernel.dim());
    if (prev.rows() > 0) warm.topRows(prev.rows()) = prev;
    warm.bottomRows(b - prev.rows()) = near_origin(kernel, static_cast<int>(b - prev.rows()), rng);
    for (int i = 0; i < b; ++i) warm.row(i) = box.project(warm.row(i).transpose()).transpose();
    const MatrixOptReport rep =
        minimize_error_function(obj, box, b, restarts, derive_seed(seed, static_cast<std::uint64_t>(b)), {warm});
    out.push_back(rep.value);
    prev = rep.z_star;
  }
  return out;
}

}  // namespace localbo
