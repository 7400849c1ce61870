#pragma once

#include "localbo/acquisition.hpp"
#include "localbo/objectives.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace localbo {

enum class BetaMode { fixed, theoretical };
enum class BatchMode { fixed, logsq, linear, quadratic };

std::string to_string(BatchMode mode);
BatchMode batch_mode_from_string(const std::string& name);

struct ScheduleSpec {
  BetaMode beta_mode = BetaMode::fixed;
  double beta = 3.0;
  /// Confidence parameter for the theoretical schedule.
  double delta = 0.1;
  BatchMode b1_mode = BatchMode::fixed;
  int b1 = 1;
  /// Fixed mode uses b2 as is; growing modes scale by the dimension.
  BatchMode b2_mode = BatchMode::fixed;
  int b2 = 0;
  /// Look-ahead batch size.
  int b_lookahead = 1;

  /// beta_t; sqrt(2 ln(pi^2 t^2 / delta)) under the theoretical schedule.
  double beta_at(int t) const;
  int b1_at(int t) const;
  int b2_at(int t, int dim) const;
};

struct IterationRecord {
  int t = 0;
  Vector x_t;
  Matrix queried;
  /// Observations in the objective's own sign.
  Vector observed;
  /// Noise-free values of the queries when the objective provides them.
  Vector true_values;
  /// Posterior mean at x_t, objective's sign.
  double incumbent_estimate = 0.0;
  std::optional<double> incumbent_true;
  double best_observed = 0.0;
  double beta = 0.0;
  int b1 = 0;
  int b2 = 0;
  long n = 0;
  double wall_time = 0.0;
};

struct RunTrace {
  std::string algorithm;
  std::uint64_t seed = 0;
  Sense sense = Sense::minimize;
  std::vector<IterationRecord> records;
  Vector x_final;
  long total_queries() const { return records.empty() ? 0 : records.back().n; }
};

/// Settings shared by the local loops.
struct LocalOptions {
  ScheduleSpec schedule;
  KernelSpec kernel = KernelSpec::isotropic(KernelFamily::rbf, 1, 1.0);
  double model_noise = 0.1;
  /// Options for the exploitation (UCB) minimization.
  OptOptions exploit_opt;
  /// Options for the exploration (alpha_trace / look-ahead) minimization.
  OptOptions explore_opt;
  /// Initial batch perturbations around x_t, as a fraction of the lengthscale.
  double perturbation = 0.1;
  /// Stop after this many iterations even if budget remains (0: no limit).
  int max_iterations = 0;
};

struct GiboConfig {
  LocalOptions local;
  double eta = 0.1;
  /// Use eta / t instead of a constant step.
  bool eta_decay = false;
};

struct LaMinUcbConfig {
  LocalOptions local;
  LookaheadConfig lookahead;
};

RunTrace run_gibo(const Objective& objective, PointRef x1, const GiboConfig& cfg, long budget, std::uint64_t seed);
RunTrace run_minucb(const Objective& objective, PointRef x1, const LocalOptions& cfg, long budget, std::uint64_t seed);
RunTrace run_la_minucb(const Objective& objective, PointRef x1, const LaMinUcbConfig& cfg, long budget,
                       std::uint64_t seed);
RunTrace run_random_search(const Objective& objective, long budget, std::uint64_t seed, long batch = 1);

/// MinUCB exploration combined with a gradient step for exploitation; with
/// beta = 0 and b1 = 0 it issues exactly GIBO's queries.
RunTrace run_minucb_gradient_step(const Objective& objective, PointRef x1, const GiboConfig& cfg, long budget,
                                  std::uint64_t seed);

/// ||grad f(x_t)|| per iteration using the objective's analytic gradient.
std::vector<double> grad_norm_diagnostic(const RunTrace& trace, const Objective& objective);

/// Minimizes alpha_trace at the origin of a data-free model over b inputs.
/// An upper estimate of the smallest achievable gradient uncertainty.
double error_function_estimate(const KernelSpec& kernel, double sigma, int b, int restarts, std::uint64_t seed);

/// error_function_estimate over increasing batch sizes, warm-starting each
/// size from the previous solution so the curve is nonincreasing.
std::vector<double> error_function_curve(const KernelSpec& kernel, double sigma, const std::vector<int>& sizes,
                                         int restarts, std::uint64_t seed);

/// Query seed for the i-th evaluation of a run.
std::uint64_t query_seed(std::uint64_t run_seed, long index);

}  // namespace localbo
