#include "localbo/acquisition.hpp"
#include "localbo/random.hpp"
#include "oracles.hpp"

#include <doctest.h>

using namespace localbo;

namespace {

GpModel toy_model(KernelFamily fam, int n, int d, std::uint64_t seed, double noise = 0.1) {
  const auto k = KernelSpec::isotropic(fam, d, 0.9, 1.2);
  Rng rng(seed);
  const Matrix x = 0.8 * rng.normal_matrix(n, d);
  Vector y(n);
  for (int i = 0; i < n; ++i) y[i] = std::cos(x.row(i).sum()) + noise * rng.normal();
  return fit(k, Dataset(x, y, noise));
}

/// tr(H0 - J K^-1 J^T) over X u Z with every kernel derivative taken by
/// finite differences and K inverted densely.
double dense_alpha(const KernelSpec& k, const Matrix& x, const Matrix& z, double noise, const Vector& xt) {
  Matrix all(x.rows() + z.rows(), xt.size());
  if (x.rows() > 0) all.topRows(x.rows()) = x;
  all.bottomRows(z.rows()) = z;
  const Eigen::Index n = all.rows();
  Matrix kk(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) kk(i, j) = k.eval(all.row(i).transpose(), all.row(j).transpose());
  kk.diagonal().array() += noise * noise;
  Matrix j(n, xt.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vector xi = all.row(i).transpose();
    j.row(i) = oracle::fd_gradient([&](const Vector& p) { return k.eval(p, xi); }, xt).transpose();
  }
  // Prior gradient variance from a mixed second difference at zero lag.
  double h0 = 0.0;
  const double h = 1e-4;
  for (Eigen::Index a = 0; a < xt.size(); ++a) {
    Vector p = xt, m = xt;
    p[a] += h;
    m[a] -= h;
    h0 += (k.eval(p, p) - k.eval(p, m) - k.eval(m, p) + k.eval(m, m)) / (4.0 * h * h);
  }
  return h0 - (j.transpose() * kk.inverse() * j).trace();
}

}  // namespace

TEST_SUITE("acquisition") {
  TEST_CASE("ucb value and gradient") {
    const GpModel model = toy_model(KernelFamily::matern52, 8, 2, 1);
    const UcbParams params{2.0};
    Rng rng(2);
    for (int t = 0; t < 10; ++t) {
      const Vector x = rng.normal_vector(2);
      Vector g;
      const double v = ucb_with_gradient(model, x, params, g);
      CHECK(v == doctest::Approx(model.posterior_mean(x) + 2.0 * model.posterior_sd(x)));
      CHECK(v == ucb(model, x, params));
      const Vector fd = oracle::fd_gradient([&](const Vector& p) { return ucb(model, p, params); }, x);
      CHECK(oracle::max_abs(g - fd) < 1e-6);
    }
  }

  TEST_CASE("alpha_trace matches a dense oracle") {
    for (auto fam : {KernelFamily::rbf, KernelFamily::matern52}) {
      const GpModel model = toy_model(fam, 6, 2, 3);
      Rng rng(4);
      const Matrix z = 0.5 * rng.normal_matrix(3, 2);
      const Vector xt = 0.2 * rng.normal_vector(2);
      const double expected = dense_alpha(model.kernel(), model.data().X, z, 0.1, xt);
      CHECK(alpha_trace(model, xt, z) == doctest::Approx(expected).epsilon(1e-5));
    }
  }

  TEST_CASE("prepared alpha_trace agrees with the generic route and has the right gradient") {
    for (auto fam : {KernelFamily::rbf, KernelFamily::matern52}) {
      for (int n : {0, 7}) {
        const GpModel model = toy_model(fam, n, 3, 5);
        Rng rng(6);
        const Vector xt = 0.3 * rng.normal_vector(3);
        const AlphaTraceObjective obj(model.covariance(), xt);
        CHECK(obj.base_trace() == doctest::Approx(model.grad_cov(xt).trace()));
        for (int t = 0; t < 4; ++t) {
          const Matrix z = xt.transpose().replicate(4, 1) + 0.6 * rng.normal_matrix(4, 3);
          Matrix g;
          const double v = obj.value_and_gradient(z, g);
          CHECK(v == doctest::Approx(alpha_trace(model, xt, z)).epsilon(1e-10));
          const Matrix fd = oracle::fd_matrix_gradient([&](const Matrix& m) { return obj.value(m); }, z);
          CHECK(oracle::max_abs(g - fd) < 1e-6);
        }
      }
    }
  }

  TEST_CASE("alpha_trace shrinks as inputs are added") {
    const GpModel model = toy_model(KernelFamily::rbf, 5, 2, 7);
    Rng rng(8);
    const Vector xt = Vector::Zero(2);
    const Matrix z = 0.5 * rng.normal_matrix(5, 2);
    double prev = model.grad_cov(xt).trace();
    for (int b = 1; b <= 5; ++b) {
      const double a = alpha_trace(model, xt, z.topRows(b));
      CHECK(a <= prev + 1e-12);
      CHECK(a >= -1e-12);
      prev = a;
    }
  }

  TEST_CASE("gradient bounds") {
    Vector g(2), gm(2), x0(2);
    g << 1.0, -2.0;
    gm << 1.2, -1.5;
    x0 << 0.5, 0.5;
    const double f0 = 3.0, eta = 0.25;
    // The approximate-gradient bound is the quadratic bound evaluated at the step.
    const Vector step = x0 - eta * gm;
    CHECK(gibo_upper_bound(f0, g, gm, eta) == doctest::Approx(quadratic_upper_bound(f0, g, 1.0 / eta, x0, step)));
    const Vector vertex = quadratic_bound_minimizer(g, 4.0, x0);
    CHECK(quadratic_upper_bound(f0, g, 4.0, x0, vertex) == doctest::Approx(f0 - g.squaredNorm() / 8.0));
    CHECK(quadratic_upper_bound(f0, g, 4.0, x0, x0) == f0);
    CHECK_THROWS_AS(quadratic_bound_minimizer(g, 0.0, x0), InvalidArgument);
  }

  TEST_CASE("fantasy observations follow the predictive distribution at Z") {
    const GpModel model = toy_model(KernelFamily::rbf, 5, 2, 9);
    Matrix z(2, 2);
    z << 0.1, 0.2, 1.0, -0.5;
    const int count = 20000;
    const LookaheadProblem prob(model, 3.0, fantasy_normals(count, 2, 10));
    const Matrix ys = prob.fantasy_observations(z);
    const Vector mean = ys.colwise().mean();
    const Matrix centered = ys.rowwise() - mean.transpose();
    const Matrix cov = centered.transpose() * centered / (count - 1);
    Matrix expected = model.posterior_cov(z, z);
    expected.diagonal().array() += 0.01;
    const Vector mu = model.posterior_means(z);
    for (int i = 0; i < 2; ++i) CHECK(std::abs(mean[i] - mu[i]) < 5.0 * std::sqrt(expected(i, i) / count));
    CHECK(oracle::max_abs(cov - expected) < 0.05 * expected.diagonal().maxCoeff());
  }

  TEST_CASE("one-shot value equals the fantasy-model UCB") {
    for (int n : {0, 6}) {
      const GpModel model = toy_model(KernelFamily::matern52, n, 2, 11);
      Rng rng(12);
      const Matrix z = 0.7 * rng.normal_matrix(3, 2);
      const LookaheadProblem prob(model, 2.5, fantasy_normals(5, 3, 13));
      const Matrix inner = rng.normal_matrix(5, 2);
      const Matrix ys = prob.fantasy_observations(z);
      double expected = 0.0;
      for (int f = 0; f < 5; ++f) {
        const GpModel fm = model.fantasy_update(z, ys.row(f).transpose());
        expected += ucb(fm, inner.row(f).transpose(), UcbParams{2.5});
      }
      CHECK(prob.one_shot_value(z, inner) == doctest::Approx(expected / 5.0).epsilon(1e-9));
    }
  }

  TEST_CASE("one-shot gradients agree with finite differences") {
    for (auto fam : {KernelFamily::rbf, KernelFamily::matern52}) {
      for (int n : {0, 6}) {
        const GpModel model = toy_model(fam, n, 2, 14);
        Rng rng(15);
        const Matrix z = 0.7 * rng.normal_matrix(3, 2);
        const Matrix inner = 0.7 * rng.normal_matrix(4, 2);
        const LookaheadProblem prob(model, 3.0, fantasy_normals(4, 3, 16));
        Matrix gz, gi;
        prob.one_shot_value(z, inner, &gz, &gi);
        const Matrix fz = oracle::fd_matrix_gradient([&](const Matrix& m) { return prob.one_shot_value(m, inner); }, z);
        const Matrix fi = oracle::fd_matrix_gradient([&](const Matrix& m) { return prob.one_shot_value(z, m); }, inner);
        CHECK(oracle::max_abs(gz - fz) < 1e-6);
        CHECK(oracle::max_abs(gi - fi) < 1e-6);
      }
    }
  }

  TEST_CASE("look-ahead value does not exceed the current UCB minimum") {
    const GpModel model = toy_model(KernelFamily::rbf, 6, 1, 17);
    const Box box = Box::uniform(1, -2.0, 2.0);
    const UcbParams params{2.0};
    Matrix grid(401, 1);
    for (int i = 0; i < 401; ++i) grid(i, 0) = -2.0 + 4.0 * i / 400.0;
    double ucb_min = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 401; ++i) ucb_min = std::min(ucb_min, ucb(model, grid.row(i).transpose(), params));
    Matrix z(2, 1);
    z << 0.3, -0.6;
    const LookaheadConfig cfg{64, 4, 3};
    const double on_grid = lookahead_value_on_grid(model, z, params, cfg, grid);
    const double exact = lookahead_value(model, z, params, cfg, box);
    // The bound holds in expectation; allow two Monte Carlo standard errors
    // estimated from the per-fantasy grid minima.
    const LookaheadProblem prob(model, params.beta, fantasy_normals(64, 2, 3));
    const Matrix ys = prob.fantasy_observations(z);
    Vector minima(64);
    for (int f = 0; f < 64; ++f) {
      const GpModel fm = model.fantasy_update(z, ys.row(f).transpose());
      minima[f] = std::numeric_limits<double>::infinity();
      for (int i = 0; i < 401; ++i) minima[f] = std::min(minima[f], ucb(fm, grid.row(i).transpose(), params));
    }
    const double se = std::sqrt((minima.array() - minima.mean()).square().sum() / 63.0 / 64.0);
    CHECK(minima.mean() == doctest::Approx(on_grid).epsilon(1e-12));
    CHECK(on_grid <= ucb_min + 2.0 * se);
    // Continuous inner minima can only be lower than grid minima.
    CHECK(exact <= on_grid + 1e-9);
    CHECK(exact == lookahead_value(model, z, params, cfg, box));
  }

  TEST_CASE("look-ahead optimization improves on its start and stays in the box") {
    const GpModel model = toy_model(KernelFamily::rbf, 8, 2, 18);
    const Box box = Box::uniform(2, -1.5, 1.5);
    const UcbParams params{2.0};
    const LookaheadConfig cfg{8, 2, 19};
    OptOptions opts;
    opts.restarts = 3;
    opts.max_iterations = 60;
    const Vector anchor = Vector::Zero(2);
    const LookaheadResult res = optimize_lookahead(model, 3, params, cfg, box, anchor, opts, 0.1);
    CHECK(res.z.rows() == 3);
    CHECK(res.inner.rows() == 8);
    for (int i = 0; i < 3; ++i) CHECK(box.contains(res.z.row(i).transpose()));
    const LookaheadProblem prob(model, 2.0, fantasy_normals(8, 3, 19));
    CHECK(res.value == doctest::Approx(prob.one_shot_value(res.z, res.inner)));
    const Matrix start_inner = anchor.transpose().replicate(8, 1);
    const Matrix start_z = anchor.transpose().replicate(3, 1);
    CHECK(res.value <= prob.one_shot_value(start_z, start_inner) + 1e-9);
  }
}
