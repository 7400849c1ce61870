#pragma once

#include "localbo/box.hpp"
#include "localbo/gp.hpp"
#include "localbo/inner_opt.hpp"

#include <cstdint>

namespace localbo {

struct UcbParams {
  double beta = 3.0;
};

/// mu_D(x) + beta * sigma_D(x).
double ucb(const GpModel& model, PointRef x, const UcbParams& params);

/// Same as ucb() and writes the gradient. Where the posterior sd is zero the
/// sd term contributes no gradient.
double ucb_with_gradient(const GpModel& model, PointRef x, const UcbParams& params, Vector& grad);

/// Trace of the gradient covariance at x_t after conditioning on the inputs
/// Z (no labels needed). Computed through condition_inputs_only + grad_cov.
double alpha_trace(const GpModel& model, PointRef x_t, const Matrix& z);
double alpha_trace(const VarianceView& view, PointRef x_t, const Matrix& z);

/// alpha_trace specialised to one x_t, with an analytic gradient in Z.
/// The data-dependent pieces are computed once in the constructor, so each
/// evaluation costs one n x b triangular solve.
class AlphaTraceObjective {
 public:
  AlphaTraceObjective(const VarianceView& view, PointRef x_t);

  double value(const Matrix& z) const;
  double value_and_gradient(const Matrix& z, Matrix& grad) const;

  /// trace(grad_cov) at x_t with no extra inputs.
  double base_trace() const { return base_trace_; }

 private:
  double evaluate(const Matrix& z, Matrix* grad) const;

  const VarianceView* view_;
  Vector x_t_;
  Matrix grad_rows_;     // J(x_t, X), n x d
  Matrix solved_grads_;  // K^-1 J, n x d
  double base_trace_ = 0.0;
};

/// f0 + <grad, x - x0> + (L/2)||x - x0||^2.
double quadratic_upper_bound(double f0, PointRef grad, double lipschitz, PointRef x0, PointRef x);

/// Vertex x0 - grad / L of the quadratic bound.
Vector quadratic_bound_minimizer(PointRef grad, double lipschitz, PointRef x0);

/// f0 - (eta/2)||grad_true||^2 + (eta/2)||grad_mu - grad_true||^2, the bound
/// at the approximate-gradient step x0 - eta * grad_mu.
double gibo_upper_bound(double f0, PointRef grad_true, PointRef grad_mu, double eta);

struct LookaheadConfig {
  int num_fantasies = 16;
  int inner_restarts = 8;
  std::uint64_t seed = 0;
};

/// Common random numbers for the fantasies: num_fantasies x batch standard
/// normals, drawn row by row from seed.
Matrix fantasy_normals(int num_fantasies, int batch, std::uint64_t seed);

/// Look-ahead machinery for one model, beta and set of fantasy normals.
///
/// Fantasy f observes y_Z = mu_D(Z) + chol(k_D(Z,Z) + sigma^2 I) eps_f. After
/// conditioning, the fantasy mean and variance have the closed forms
///   mu_f(x) = mu_D(x) + k_D(x,Z) L^-T eps_f
///   v(x)    = sigma_D^2(x) - k_D(x,Z) S^-1 k_D(Z,x)
/// which the one-shot objective uses directly.
class LookaheadProblem {
 public:
  LookaheadProblem(const GpModel& model, double beta, Matrix normals);

  int num_fantasies() const { return static_cast<int>(normals_.rows()); }
  int batch() const { return static_cast<int>(normals_.cols()); }
  const Matrix& normals() const { return normals_; }

  /// Fantasy labels for Z, one row per fantasy (num_fantasies x b).
  Matrix fantasy_observations(const Matrix& z) const;

  /// Mean over fantasies of UCB_f(x_f), where row f of inner holds x_f.
  /// Gradients (optional) have the shapes of z and inner.
  double one_shot_value(const Matrix& z, const Matrix& inner, Matrix* grad_z = nullptr,
                        Matrix* grad_inner = nullptr) const;

 private:
  const GpModel* model_;
  double beta_;
  Matrix normals_;
};

/// Expected minimum of the fantasy UCB, each inner minimum taken over the box
/// with inner_opt (exact per-fantasy mode). Deterministic given cfg.seed.
double lookahead_value(const GpModel& model, const Matrix& z, const UcbParams& params,
                       const LookaheadConfig& cfg, const Box& box, const OptOptions& inner = {});

/// Same expectation with each inner minimum restricted to the rows of grid.
double lookahead_value_on_grid(const GpModel& model, const Matrix& z, const UcbParams& params,
                               const LookaheadConfig& cfg, const Matrix& grid);

struct LookaheadResult {
  Matrix z;
  Matrix inner;
  double value = 0.0;
};

/// Jointly minimizes the one-shot objective over Z (b rows) and one inner
/// minimizer per fantasy. Starts are perturbations of anchor plus the
/// optimizer's low-discrepancy fill.
LookaheadResult optimize_lookahead(const GpModel& model, int batch, const UcbParams& params,
                                   const LookaheadConfig& cfg, const Box& box, PointRef anchor,
                                   const OptOptions& options, double perturbation_scale);

/// Minimizes UCB over the box with the given starts.
OptReport minimize_ucb(const GpModel& model, const UcbParams& params, const Box& box,
                       const OptOptions& options);

}  // namespace localbo
