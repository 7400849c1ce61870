#pragma once

#include "localbo/algorithms.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace localbo {

/// Invalid or unreadable experiment configuration (CLI exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ObjectiveConfig {
  std::string kind = "synthetic";
  int dim = 2;
  KernelFamily family = KernelFamily::rbf;
  /// One entry (isotropic) or one per dimension.
  std::vector<double> lengthscale{1.4142135623730951};
  double signal_variance = 1.0;
  double noise_sigma = 0.1;
  int num_features = 1024;
  /// Half width of the symmetric box for sphere, rosenbrock and cartpole.
  double half_width = 0.0;
};

struct ModelConfig {
  KernelFamily family = KernelFamily::rbf;
  std::vector<double> lengthscale{1.4142135623730951};
  double signal_variance = 1.0;
  double noise_sigma = 0.1;
};

struct InnerOptConfig {
  int restarts = 8;
  int max_iterations = 200;
  double gradient_tolerance = 1e-8;
  int explore_restarts = 8;
  int explore_max_iterations = 200;
  double perturbation = 0.1;
};

struct AlgorithmConfig {
  /// One of gibo, minucb, la_minucb, random.
  std::string kind;
  /// Name used in file names and the summary; defaults to kind.
  std::string label;
  ScheduleSpec schedule;
  double eta = 0.01;
  bool eta_decay = false;
  LookaheadConfig lookahead;
  int max_iterations = 0;
  /// Global inner_opt settings with this entry's overrides applied.
  InnerOptConfig inner_opt;
};

struct ExperimentConfig {
  ObjectiveConfig objective;
  ModelConfig model;
  std::vector<AlgorithmConfig> algorithms;
  long budget = 0;
  int replications = 1;
  std::uint64_t base_seed = 0;
  std::string output_dir;
  InnerOptConfig inner_opt;
  /// Raw text the config was parsed from (hashed into the manifest).
  std::string source_text;
};

/// Parses a JSON experiment config. Errors carry line context.
ExperimentConfig parse_config(const std::string& text, const std::string& source_name = "<config>");
ExperimentConfig load_config(const std::filesystem::path& path);

/// 64-bit FNV-1a hash of the config text, as 16 hex digits.
std::string config_hash(const std::string& text);

KernelSpec model_kernel(const ModelConfig& cfg, int dim);

/// Objective of replication seed `seed` (synthetic paths are redrawn per seed).
std::unique_ptr<Objective> make_objective(const ObjectiveConfig& cfg, std::uint64_t seed);

/// Seed of replication r.
inline std::uint64_t replication_seed(std::uint64_t base_seed, int r) { return base_seed + static_cast<std::uint64_t>(r); }

/// Seed of the objective instance drawn for a replication seed.
std::uint64_t objective_seed(std::uint64_t replication_seed);

/// Start point shared by every algorithm in replication r.
Vector start_point(const Box& box, std::uint64_t base_seed, int replications, int r);

/// Runs one algorithm for one replication exactly as run_experiment does.
RunTrace run_replication(const ExperimentConfig& cfg, const AlgorithmConfig& alg, int r);

struct RunOptions {
  int jobs = 1;
  bool overwrite = false;
};

/// Directory an experiment writes to: output_dir resolved against the
/// LOCALBO_OUTPUT_ROOT environment variable (or the working directory).
std::filesystem::path resolve_output_dir(const ExperimentConfig& cfg);

/// Writes traces/<label>_rep<r>.jsonl, summary.csv and manifest.json.
/// Refuses a non-empty directory unless overwrite is set.
void run_experiment(const ExperimentConfig& cfg, const RunOptions& options);

struct SummaryRow {
  std::string algorithm;
  long n = 0;
  double mean = 0.0;
  double sd = 0.0;
  int count = 0;
};

/// One JSON object per line: every iteration, then a final record.
std::string trace_to_jsonl(const RunTrace& trace, const std::string& label, int replication);

/// Best value so far (objective sign) after each query of one trace file.
std::vector<double> best_so_far_from_jsonl(const std::filesystem::path& file, std::string* label = nullptr);

/// Aligns best-so-far across replications on n = 1..N and reduces to mean/sd.
std::vector<SummaryRow> summarize(const std::filesystem::path& dir);
std::string summary_to_csv(const std::vector<SummaryRow>& rows);

struct Fig1Result {
  Vector grid;
  Vector f;
  Vector quadratic_bound;
  Vector gibo_bound;
  Vector ucb;
  Vector posterior_mean;
  Matrix data_x;
  Vector data_y;
  double x0 = 0.0;
  double lipschitz = 0.0;
  double grad_true = 0.0;
  double grad_mu = 0.0;
  double x_gradient_step = 0.0;
  double x_ucb_min = 0.0;
  double f_gradient_step = 0.0;
  double f_ucb_min = 0.0;
  /// Fraction of grid points with f <= UCB.
  double coverage = 0.0;
};

/// One-dimensional bound comparison: a prior path of exp(-(x-x')^2 / 4),
/// two noisy observations at x0 +/- 0.75, and the quadratic, gradient-step
/// and UCB (beta = 3) upper bounds on a 501-point grid over [-10, 10].
Fig1Result compute_fig1(std::uint64_t seed);
std::string fig1_to_csv(const Fig1Result& result);
Fig1Result fig1_demo(std::uint64_t seed, const std::filesystem::path& out_path);

/// Shortest round-trip decimal form of a double ("nan" for NaN).
std::string format_double(double v);

}  // namespace localbo
