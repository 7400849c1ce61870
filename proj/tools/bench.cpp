#include "localbo/harness.hpp"

#include "CLI11.hpp"

#include <fstream>
#include <functional>
#include <iostream>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitOther = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

int guarded(const std::function<void()>& body) {
  try {
    body();
    return kExitOk;
  } catch (const localbo::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const localbo::NumericalBreakdown& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const localbo::OptFailure& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitOther;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Local Bayesian optimization benchmark harness"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_override;
  localbo::RunOptions run_options;
  auto* run = app.add_subcommand("run", "Run every replication of an experiment config");
  run->add_option("config", config_path, "JSON experiment config")->required();
  run->add_option("--jobs,-j", run_options.jobs, "Concurrent replications")->check(CLI::PositiveNumber);
  run->add_flag("--overwrite", run_options.overwrite, "Replace artifacts in a non-empty output directory");
  run->add_option("--out", out_override, "Output directory (overrides output_dir in the config)");

  std::string summary_dir;
  auto* summarize = app.add_subcommand("summarize", "Recompute summary.csv from the traces in a run directory");
  summarize->add_option("dir", summary_dir, "Run directory")->required();

  std::uint64_t fig_seed = 0;
  std::string fig_out;
  auto* fig1 = app.add_subcommand("fig1", "Write the one-dimensional bound comparison dataset");
  fig1->add_option("--seed", fig_seed, "Seed of the sampled function")->required();
  fig1->add_option("--out", fig_out, "Output CSV path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  if (*run) {
    return guarded([&] {
      localbo::ExperimentConfig cfg = localbo::load_config(config_path);
      if (!out_override.empty()) cfg.output_dir = out_override;
      localbo::run_experiment(cfg, run_options);
      std::cout << "wrote " << localbo::resolve_output_dir(cfg).string() << "\n";
    });
  }
  if (*summarize) {
    return guarded([&] {
      const auto rows = localbo::summarize(summary_dir);
      const std::string csv = localbo::summary_to_csv(rows);
      std::filesystem::path dir(summary_dir);
      std::ofstream out(dir / "summary.csv", std::ios::binary | std::ios::trunc);
      if (!out) throw std::runtime_error("cannot write " + (dir / "summary.csv").string());
      out << csv;
      std::cout << csv;
    });
  }
  return guarded([&] {
    const localbo::Fig1Result r = localbo::fig1_demo(fig_seed, fig_out);
    std::cout << "L=" << r.lipschitz << " coverage=" << r.coverage << " f(gradient step)=" << r.f_gradient_step
              << " f(argmin ucb)=" << r.f_ucb_min << "\n";
  });
}
