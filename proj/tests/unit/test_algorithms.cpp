#include "doctest.h"
#include "oracles.hpp"

#include "localbo/algorithms.hpp"
#include "localbo/harness.hpp"
#include "localbo/inner_opt.hpp"
#include "localbo/random.hpp"

#include <cmath>

using namespace localbo;

namespace {

class Constant final : public Objective {
 public:
  explicit Constant(int dim) : box_(Box::unit(dim)) {}
  std::string name() const override { return "constant"; }
  const Box& box() const override { return box_; }
  double noise_sigma() const override { return 0.0; }
  bool has_true_value() const override { return true; }
  bool has_true_gradient() const override { return true; }
  double true_value(PointRef) const override { return 2.0; }
  Vector true_gradient(PointRef x) const override { return Vector::Zero(x.size()); }

 private:
  Box box_;
};

LocalOptions local_options(const KernelSpec& k, double noise) {
  LocalOptions o;
  o.kernel = k;
  o.model_noise = noise;
  o.exploit_opt.restarts = 8;
  o.exploit_opt.max_iterations = 200;
  o.explore_opt.restarts = 2;
  o.explore_opt.max_iterations = 100;
  return o;
}

Dataset data_of(const RunTrace& trace, int dim, double noise, int upto) {
  Dataset d(dim, noise);
  for (int t = 0; t < upto; ++t) d = d.appended(trace.records[t].queried, trace.records[t].observed);
  return d;
}

Vector grid_1d(int n) { return Vector::LinSpaced(n, 0.0, 1.0); }

double best_true(const RunTrace& trace) {
  double b = std::numeric_limits<double>::infinity();
  for (const auto& r : trace.records) b = std::min(b, r.true_values.minCoeff());
  return b;
}

}  // namespace

TEST_SUITE("algorithms") {
  TEST_CASE("schedules") {
    ScheduleSpec s;
    CHECK(s.beta_at(5) == 3.0);
    s.beta_mode = BetaMode::theoretical;
    s.delta = 0.1;
    CHECK(s.beta_at(2) == doctest::Approx(std::sqrt(2.0 * std::log(M_PI * M_PI * 4.0 / 0.1))));
    CHECK(s.beta_at(3) > s.beta_at(2));
    s.b1_mode = BatchMode::logsq;
    CHECK(s.b1_at(1) == 1);
    CHECK(s.b1_at(10) == static_cast<int>(std::ceil(std::log(10.0) * std::log(10.0))));
    s.b2_mode = BatchMode::linear;
    CHECK(s.b2_at(4, 3) == 12);
    s.b2_mode = BatchMode::quadratic;
    CHECK(s.b2_at(3, 2) == 18);
    s.b2_mode = BatchMode::fixed;
    s.b2 = 7;
    CHECK(s.b2_at(9, 3) == 7);
    CHECK(batch_mode_from_string(to_string(BatchMode::logsq)) == BatchMode::logsq);
    CHECK_THROWS(batch_mode_from_string("cubic"));
  }

  TEST_CASE("GIBO with an empty first batch keeps the start point") {
    const auto obj = make_synthetic(KernelSpec::isotropic(KernelFamily::rbf, 2, 0.3), 0.1, 256, 1);
    GiboConfig g;
    g.local = local_options(obj->path().kernel(), 0.1);
    g.local.schedule.b2 = 0;
    g.local.max_iterations = 1;
    g.eta = 0.5;
    const Vector x1 = Vector::Constant(2, 0.3);
    const RunTrace tr = run_gibo(*obj, x1, g, 50, 3);
    REQUIRE(tr.records.size() == 1);
    CHECK(tr.total_queries() == 0);
    CHECK(tr.x_final == x1);
  }

  TEST_CASE("budget of exactly one batch gives one iteration") {
    Sphere sphere(2, 1.0, 0.01);
    GiboConfig g;
    g.local = local_options(KernelSpec::isotropic(KernelFamily::rbf, 2, 0.5), 0.01);
    g.local.schedule.b2 = 4;
    const RunTrace tr = run_gibo(sphere, Vector::Constant(2, 0.5), g, 4, 1);
    CHECK(tr.records.size() == 1);
    CHECK(tr.total_queries() == 4);
  }

  TEST_CASE("GIBO descends a convex quadratic") {
    Sphere sphere(2, 1.0, 0.01);
    GiboConfig g;
    g.local = local_options(KernelSpec::isotropic(KernelFamily::rbf, 2, 0.5), 0.01);
    g.local.schedule.b2 = 4;
    g.eta = 0.2;
    const Matrix starts = scrambled_sobol(10, 2, 77);
    int improved = 0;
    for (int s = 0; s < 10; ++s) {
      const Vector x1 = sphere.box().from_unit(starts.row(s).transpose());
      const RunTrace gi = run_gibo(sphere, x1, g, 120, static_cast<std::uint64_t>(s));
      CHECK(gi.total_queries() == 120);
      improved += sphere.true_value(gi.x_final) < sphere.true_value(x1) ? 1 : 0;
    }
    CHECK(improved >= 9);
  }

  TEST_CASE("random search loses to GIBO on a higher-dimensional quadratic") {
    const int d = 8;
    Sphere sphere(d, 1.0, 0.01);
    GiboConfig g;
    g.local = local_options(KernelSpec::isotropic(KernelFamily::rbf, d, 2.0), 0.01);
    g.local.schedule.b2 = d;
    g.eta = 0.2;
    const Matrix starts = scrambled_sobol(10, d, 78);
    int gibo_wins = 0;
    for (int s = 0; s < 10; ++s) {
      const Vector x1 = sphere.box().from_unit(starts.row(s).transpose());
      const RunTrace gi = run_gibo(sphere, x1, g, 200, static_cast<std::uint64_t>(s));
      const RunTrace rs = run_random_search(sphere, 200, static_cast<std::uint64_t>(s));
      gibo_wins += best_true(rs) > sphere.true_value(gi.x_final) ? 1 : 0;
    }
    CHECK(gibo_wins >= 8);
  }

  TEST_CASE("MinUCB with beta 0 and no resampling plus a gradient step issues GIBO's queries") {
    const auto obj = make_synthetic(KernelSpec::isotropic(KernelFamily::rbf, 3, 0.4), 0.1, 512, 4);
    GiboConfig g;
    g.local = local_options(obj->path().kernel(), 0.1);
    g.local.schedule.beta = 0.0;
    g.local.schedule.b1 = 0;
    g.local.schedule.b2 = 3;
    g.eta = 0.05;
    const Vector x1 = Vector::Constant(3, 0.5);
    const RunTrace a = run_gibo(*obj, x1, g, 30, 9);
    const RunTrace b = run_minucb_gradient_step(*obj, x1, g, 30, 9);
    REQUIRE(a.records.size() == b.records.size());
    for (std::size_t t = 0; t < a.records.size(); ++t) {
      CHECK(a.records[t].queried == b.records[t].queried);
      CHECK(a.records[t].observed == b.records[t].observed);
    }
    CHECK(a.x_final == b.x_final);
  }

  TEST_CASE("MinUCB budget accounting") {
    const int d = 2;
    const auto obj = make_synthetic(KernelSpec::isotropic(KernelFamily::rbf, d, 0.3), 0.1, 256, 5);
    LocalOptions o = local_options(obj->path().kernel(), 0.1);
    o.schedule.b1 = 1;
    o.schedule.b2 = 2 * d;
    o.max_iterations = 3;
    const RunTrace tr = run_minucb(*obj, Vector::Constant(d, 0.5), o, 1000, 2);
    CHECK(tr.records.size() == 3);
    CHECK(tr.total_queries() == 3 * (1 + 2 * d));

    // The final batch is truncated to the budget.
    o.max_iterations = 0;
    const RunTrace cut = run_minucb(*obj, Vector::Constant(d, 0.5), o, 12, 2);
    CHECK(cut.total_queries() == 12);
    CHECK(cut.records.back().queried.rows() == 2);
  }

  TEST_CASE("MinUCB with beta 0 steps to the posterior-mean minimizer") {
    const auto obj = make_synthetic(KernelSpec::isotropic(KernelFamily::rbf, 1, 0.2), 0.05, 512, 11);
    LocalOptions o = local_options(obj->path().kernel(), 0.05);
    o.schedule.beta = 0.0;
    o.schedule.b2 = 3;
    o.max_iterations = 1;
    const RunTrace tr = run_minucb(*obj, Vector::Constant(1, 0.4), o, 100, 6);
    const GpModel model = fit(o.kernel, data_of(tr, 1, 0.05, 1));
    const Vector grid = grid_1d(10001);
    double best = std::numeric_limits<double>::infinity();
    double arg = 0.0;
    for (Eigen::Index i = 0; i < grid.size(); ++i) {
      const double m = model.posterior_mean(Vector::Constant(1, grid[i]));
      if (m < best) {
        best = m;
        arg = grid[i];
      }
    }
    CHECK(std::abs(tr.x_final[0] - arg) <= 1e-3);
  }

  TEST_CASE("MinUCB with a huge beta steps next to existing data") {
    const auto obj = make_synthetic(KernelSpec::isotropic(KernelFamily::rbf, 1, 0.2), 0.05, 512, 12);
    LocalOptions o = local_options(obj->path().kernel(), 0.05);
    o.schedule.beta = 1e6;
    o.schedule.b2 = 2;
    o.max_iterations = 1;
    const RunTrace tr = run_minucb(*obj, Vector::Constant(1, 0.7), o, 100, 7);
    const GpModel model = fit(o.kernel, data_of(tr, 1, 0.05, 1));
    const Vector grid = grid_1d(1001);
    double min_sd = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < grid.size(); ++i) min_sd = std::min(min_sd, model.posterior_sd(Vector::Constant(1, grid[i])));
    CHECK(model.posterior_sd(tr.x_final) <= min_sd + 1e-6);
  }

  TEST_CASE("LA-MinUCB budget accounting and determinism") {
    const auto obj = make_synthetic(KernelSpec::isotropic(KernelFamily::rbf, 2, 0.3), 0.1, 256, 8);
    LaMinUcbConfig cfg;
    cfg.local = local_options(obj->path().kernel(), 0.1);
    cfg.local.schedule.b_lookahead = 2;
    cfg.local.max_iterations = 3;
    cfg.local.explore_opt.max_iterations = 30;
    cfg.lookahead.num_fantasies = 8;
    const Vector x1 = Vector::Constant(2, 0.5);
    const RunTrace a = run_la_minucb(*obj, x1, cfg, 1000, 4);
    CHECK(a.total_queries() == 3 * (2 + 1));
    const RunTrace b = run_la_minucb(*obj, x1, cfg, 1000, 4);
    CHECK(trace_to_jsonl(a, "la", 0) == trace_to_jsonl(b, "la", 0));
    const RunTrace c = run_la_minucb(*obj, x1, cfg, 1000, 5);
    CHECK(trace_to_jsonl(a, "la", 0) != trace_to_jsonl(c, "la", 0));
    // Final batch truncated: 7 = 2 full iterations of 3 plus one query.
    cfg.local.max_iterations = 0;
    CHECK(run_la_minucb(*obj, x1, cfg, 7, 4).total_queries() == 7);
  }

  TEST_CASE("look-ahead step with one candidate and beta 0 picks the knowledge-gradient point") {
    const KernelSpec k = KernelSpec::isotropic(KernelFamily::rbf, 1, 0.2);
    Matrix x(3, 1);
    x << 0.15, 0.45, 0.8;
    Vector y(3);
    y << 0.2, -0.6, 0.1;
    const GpModel model = fit(k, Dataset(x, y, 0.1));
    const Vector grid = grid_1d(401);
    Matrix gm(grid.size(), 1);
    gm.col(0) = grid;
    const Vector mu = model.posterior_means(gm);

    // Gauss-Hermite expectation of the grid minimum of the fantasy mean.
    Matrix jac = Matrix::Zero(64, 64);
    for (int i = 1; i < 64; ++i) jac(i, i - 1) = jac(i - 1, i) = std::sqrt(static_cast<double>(i));
    Eigen::SelfAdjointEigenSolver<Matrix> es(jac);
    const Vector nodes = es.eigenvalues();
    const Vector weights = es.eigenvectors().row(0).transpose().array().square();
    double best_val = std::numeric_limits<double>::infinity();
    double best_z = 0.0;
    for (Eigen::Index c = 0; c < grid.size(); ++c) {
      Matrix z(1, 1);
      z << grid[c];
      const Vector u = model.posterior_cov(gm, z).col(0) /
                       std::sqrt(model.posterior_var(z.row(0).transpose()) + 0.01);
      double v = 0.0;
      for (int i = 0; i < 64; ++i) v += weights[i] * (mu + u * nodes[i]).minCoeff();
      if (v < best_val) {
        best_val = v;
        best_z = grid[c];
      }
    }

    LookaheadConfig cfg;
    cfg.num_fantasies = 256;
    cfg.seed = 3;
    OptOptions o;
    o.restarts = 4;
    o.max_iterations = 200;
    o.seed = 5;
    const LookaheadResult res =
        optimize_lookahead(model, 1, UcbParams{0.0}, cfg, Box::unit(1), Vector::Constant(1, 0.45), o, 0.3);
    MESSAGE("oracle z* = " << best_z << ", look-ahead z = " << res.z(0, 0));
    CHECK(std::abs(res.z(0, 0) - best_z) <= 0.02);
  }

  TEST_CASE("random search") {
    Sphere sphere(2);
    CHECK(run_random_search(sphere, 0, 1).records.empty());
    const RunTrace a = run_random_search(sphere, 25, 3);
    const RunTrace b = run_random_search(sphere, 25, 3);
    CHECK(a.total_queries() == 25);
    CHECK(trace_to_jsonl(a, "r", 0) == trace_to_jsonl(b, "r", 0));
    CHECK(run_random_search(sphere, 25, 3, 4).records.back().queried.rows() == 1);
  }

  TEST_CASE("gradient-norm diagnostic") {
    Constant flat(2);
    GiboConfig g;
    g.local = local_options(KernelSpec::isotropic(KernelFamily::rbf, 2, 0.3), 0.1);
    g.local.schedule.b2 = 2;
    const RunTrace tr = run_gibo(flat, Vector::Constant(2, 0.5), g, 10, 1);
    for (double v : grad_norm_diagnostic(tr, flat)) CHECK(v == 0.0);

    // Nearly exact gradients on a noise-free quadratic: eta = 1/4 halves x.
    Sphere sphere(2, 1.0, 0.0);
    GiboConfig q;
    q.local = local_options(KernelSpec::isotropic(KernelFamily::rbf, 2, 1.0), 1e-3);
    q.local.schedule.b2 = 4;
    q.local.perturbation = 0.05;
    q.eta = 0.25;
    const RunTrace qt = run_gibo(sphere, Vector::Constant(2, 0.8), q, 40, 2);
    const std::vector<double> gn = grad_norm_diagnostic(qt, sphere);
    REQUIRE(gn.size() == 10);
    for (std::size_t t = 1; t < 6; ++t) CHECK(gn[t] <= 0.6 * gn[t - 1]);
    CHECK_THROWS_AS(grad_norm_diagnostic(qt, CartPole()), ContractViolation);
  }

  TEST_CASE("error function") {
    const auto k = KernelSpec::isotropic(KernelFamily::rbf, 2, 1.0);
    CHECK(error_function_estimate(k, 0.1, 0, 2, 1) == doctest::Approx(k.prior_gradient_variance().sum()));
    const std::vector<double> e = error_function_curve(k, 0.1, {2, 4, 8, 16}, 2, 3);
    for (std::size_t i = 1; i < e.size(); ++i) CHECK(e[i] <= e[i - 1] + 1e-8);
    CHECK(e.front() < k.prior_gradient_variance().sum());
  }
}
