#include "localbo/acquisition.hpp"
#include "localbo/harness.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace localbo;

namespace {

py::dict fig1_dict(const Fig1Result& r) {
  py::dict d;
  d["grid"] = r.grid;
  d["f"] = r.f;
  d["quadratic_bound"] = r.quadratic_bound;
  d["gibo_bound"] = r.gibo_bound;
  d["ucb"] = r.ucb;
  d["posterior_mean"] = r.posterior_mean;
  d["data_x"] = r.data_x;
  d["data_y"] = r.data_y;
  d["x0"] = r.x0;
  d["lipschitz"] = r.lipschitz;
  d["x_gradient_step"] = r.x_gradient_step;
  d["x_ucb_min"] = r.x_ucb_min;
  d["f_gradient_step"] = r.f_gradient_step;
  d["f_ucb_min"] = r.f_ucb_min;
  d["coverage"] = r.coverage;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Local Bayesian optimization core";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
  py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
  py::register_exception<NumericalBreakdown>(m, "NumericalBreakdown", PyExc_ArithmeticError);

  py::class_<KernelSpec>(m, "Kernel")
      .def(py::init([](const std::string& family, const Vector& lengthscales, double signal_variance) {
             return KernelSpec(kernel_family_from_string(family), lengthscales, signal_variance);
           }),
           py::arg("family"), py::arg("lengthscales"), py::arg("signal_variance") = 1.0)
      .def_static(
          "isotropic",
          [](const std::string& family, int dim, double lengthscale, double signal_variance) {
            return KernelSpec::isotropic(kernel_family_from_string(family), dim, lengthscale, signal_variance);
          },
          py::arg("family"), py::arg("dim"), py::arg("lengthscale"), py::arg("signal_variance") = 1.0)
      .def_property_readonly("dim", &KernelSpec::dim)
      .def("__call__", [](const KernelSpec& k, const Vector& x, const Vector& x2) { return k.eval(x, x2); })
      .def("grad_x", [](const KernelSpec& k, const Vector& x, const Vector& x2) { return k.grad_x(x, x2); })
      .def("cross_hessian",
           [](const KernelSpec& k, const Vector& x, const Vector& x2) { return k.cross_hessian(x, x2); })
      .def("gram", [](const KernelSpec& k, const Matrix& a, const Matrix& b) { return k.gram(a, b); });

  py::class_<GpModel>(m, "GpModel")
      .def_property_readonly("dim", &GpModel::dim)
      .def_property_readonly("size", &GpModel::size)
      .def("mean", [](const GpModel& g, const Vector& x) { return g.posterior_mean(x); })
      .def("var", [](const GpModel& g, const Vector& x) { return g.posterior_var(x); })
      .def("sd", [](const GpModel& g, const Vector& x) { return g.posterior_sd(x); })
      .def("means", &GpModel::posterior_means)
      .def("cov", &GpModel::posterior_cov)
      .def("mean_grad", [](const GpModel& g, const Vector& x) { return g.posterior_mean_grad(x); })
      .def("grad_cov", [](const GpModel& g, const Vector& x) { return g.grad_cov(x); })
      .def("ucb", [](const GpModel& g, const Vector& x, double beta) { return ucb(g, x, UcbParams{beta}); },
           py::arg("x"), py::arg("beta"));

  m.def(
      "fit",
      [](const KernelSpec& kernel, const Matrix& x, const Vector& y, double noise_sigma) {
        return fit(kernel, Dataset(x, y, noise_sigma));
      },
      py::arg("kernel"), py::arg("x"), py::arg("y"), py::arg("noise_sigma"),
      "Conditions the GP prior on observations (rows of x).");

  m.def(
      "alpha_trace", [](const GpModel& g, const Vector& x_t, const Matrix& z) { return alpha_trace(g, x_t, z); },
      py::arg("model"), py::arg("x_t"), py::arg("z"), "Trace of the gradient covariance at x_t after adding z.");

  m.def(
      "run_replication",
      [](const std::string& config_text, const std::string& label, int replication) {
        const ExperimentConfig cfg = parse_config(config_text);
        for (const AlgorithmConfig& alg : cfg.algorithms) {
          if (alg.label == label) return trace_to_jsonl(run_replication(cfg, alg, replication), label, replication);
        }
        throw ConfigError("no algorithm labelled " + label);
      },
      py::arg("config_text"), py::arg("label"), py::arg("replication") = 0,
      "Runs one algorithm of a config for one replication and returns its JSONL trace.");

  m.def(
      "run_experiment",
      [](const std::filesystem::path& config, int jobs, bool overwrite) {
        const ExperimentConfig cfg = load_config(config);
        RunOptions options;
        options.jobs = jobs;
        options.overwrite = overwrite;
        py::gil_scoped_release release;
        run_experiment(cfg, options);
        return resolve_output_dir(cfg);
      },
      py::arg("config"), py::arg("jobs") = 1, py::arg("overwrite") = false);

  m.def(
      "summarize",
      [](const std::filesystem::path& dir) {
        py::list rows;
        for (const SummaryRow& r : summarize(dir)) {
          py::dict d;
          d["algorithm"] = r.algorithm;
          d["n"] = r.n;
          d["mean"] = r.mean;
          d["sd"] = r.sd;
          d["count"] = r.count;
          rows.append(d);
        }
        return rows;
      },
      py::arg("dir"));

  m.def("summary_csv", [](const std::filesystem::path& dir) { return summary_to_csv(summarize(dir)); },
        py::arg("dir"));

  m.def("fig1", [](std::uint64_t seed) { return fig1_dict(compute_fig1(seed)); }, py::arg("seed") = 0);
  m.def("fig1_csv", [](std::uint64_t seed) { return fig1_to_csv(compute_fig1(seed)); }, py::arg("seed") = 0);
}
