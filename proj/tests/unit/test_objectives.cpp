#include "doctest.h"
#include "oracles.hpp"

#include "localbo/objectives.hpp"
#include "localbo/random.hpp"

#include <cmath>

using namespace localbo;

TEST_SUITE("objectives") {
  TEST_CASE("synthetic objective is deterministic in its seed") {
    const auto k = KernelSpec::isotropic(KernelFamily::rbf, 3, 0.4);
    const auto a = make_synthetic(k, 0.1, 1024, 5);
    const auto b = make_synthetic(k, 0.1, 1024, 5);
    const auto c = make_synthetic(k, 0.1, 1024, 6);
    Rng rng(1);
    bool differs = false;
    for (int i = 0; i < 100; ++i) {
      Vector x(3);
      for (int j = 0; j < 3; ++j) x[j] = rng.uniform();
      CHECK(a->true_value(x) == b->true_value(x));
      differs = differs || a->true_value(x) != c->true_value(x);
    }
    CHECK(differs);
  }

  TEST_CASE("synthetic gradient matches finite differences") {
    const auto k = KernelSpec::isotropic(KernelFamily::matern52, 4, 0.3);
    const auto obj = make_synthetic(k, 0.1, 1024, 7);
    Rng rng(2);
    for (int i = 0; i < 10; ++i) {
      Vector x(4);
      for (int j = 0; j < 4; ++j) x[j] = rng.uniform();
      const Vector fd = oracle::fd_gradient([&](const Vector& p) { return obj->true_value(p); }, x, 1e-6);
      CHECK(oracle::max_abs(obj->true_gradient(x) - fd) <= 1e-5 * std::max(1.0, oracle::max_abs(fd)));
    }
  }

  TEST_CASE("noisy evaluations have the configured noise") {
    const auto k = KernelSpec::isotropic(KernelFamily::rbf, 2, 0.5);
    const double sigma = 0.3;
    const auto obj = make_synthetic(k, sigma, 256, 3);
    const Vector x = Vector::Constant(2, 0.4);
    const double f = obj->true_value(x);

    double sum = 0.0, ss = 0.0;
    for (int s = 0; s < 2000; ++s) {
      const double e = obj->eval_noisy(x, static_cast<std::uint64_t>(s)) - f;
      sum += e;
      ss += e * e;
    }
    const double var = ss / 2000 - (sum / 2000) * (sum / 2000);
    CHECK(std::abs(var - sigma * sigma) <= 0.1 * sigma * sigma);

    double mean = 0.0;
    for (int s = 0; s < 5000; ++s) mean += obj->eval_noisy(x, 100000 + static_cast<std::uint64_t>(s));
    mean /= 5000;
    CHECK(std::abs(mean - f) <= 3.0 * sigma / std::sqrt(5000.0));

    CHECK(obj->eval_noisy(x, 9) == obj->eval_noisy(x, 9));
    CHECK(obj->eval_noisy(x, 9) != obj->eval_noisy(x, 10));

    const auto exact = make_synthetic(k, 0.0, 256, 3);
    CHECK(exact->eval_noisy(x, 9) == exact->true_value(x));
  }

  TEST_CASE("synthetic marginal variance matches the kernel across seeds") {
    const double s2 = 1.5;
    const auto k = KernelSpec::isotropic(KernelFamily::rbf, 2, 0.3, s2);
    const Vector x0 = Vector::Constant(2, 0.5);
    double sum = 0.0, ss = 0.0;
    // Relative sd of the sample variance is sqrt(2/(seeds-1)) ~ 3%; allow ~5 of those.
    const int seeds = 2000;
    for (int s = 0; s < seeds; ++s) {
      const double v = make_synthetic(k, 0.0, 1024, static_cast<std::uint64_t>(s))->true_value(x0);
      sum += v;
      ss += v * v;
    }
    const double mean = sum / seeds;
    const double var = (ss - seeds * mean * mean) / (seeds - 1);
    CHECK(std::abs(var - s2) <= 0.15 * s2);
  }

  TEST_CASE("evaluations outside the box are rejected") {
    const auto obj = make_synthetic(KernelSpec::isotropic(KernelFamily::rbf, 2, 0.5), 0.1, 64, 1);
    CHECK_THROWS_AS(obj->eval_noisy(Vector::Constant(2, 1.5), 0), DomainError);
    CHECK_THROWS_AS(obj->eval_noisy(Vector::Constant(3, 0.5), 0), DimensionError);
    Sphere sphere(2);
    CHECK_THROWS_AS(sphere.eval_noisy(Vector::Constant(2, 6.0), 0), DomainError);
  }

  TEST_CASE("standard test functions") {
    Sphere sphere(3);
    CHECK(sphere.true_value(Vector::Zero(3)) == 0.0);
    const Vector x = (Vector(3) << 0.5, -1.0, 2.0).finished();
    CHECK(oracle::max_abs(sphere.true_gradient(x) - 2.0 * x) == 0.0);
    Rosenbrock rosen(4);
    CHECK(rosen.true_value(Vector::Ones(4)) == 0.0);
    CHECK(oracle::max_abs(rosen.true_gradient(Vector::Ones(4))) == 0.0);
    Rosenbrock rosen3(3);
    const Vector fd = oracle::fd_gradient([&](const Vector& p) { return rosen3.true_value(p); }, x, 1e-6);
    CHECK(oracle::max_abs(rosen3.true_gradient(x) - fd) < 1e-4);
  }

  TEST_CASE("internal values flip the sign of maximized objectives") {
    CartPole cp;
    CHECK(cp.to_internal(500.0) == doctest::Approx(-1.0));
    CHECK(cp.to_internal(0.0) == doctest::Approx(1.0));
    CHECK(cp.from_internal(cp.to_internal(123.0)) == doctest::Approx(123.0));
    Sphere sphere(2);
    CHECK(sphere.to_internal(3.5) == 3.5);
  }

  TEST_CASE("cart-pole rewards") {
    CHECK(cartpole_reward(Vector::Zero(4), 0) >= 1);
    const Vector theta = (Vector(4) << 0.1, -0.3, 0.8, 0.2).finished();
    CHECK(cartpole_reward(theta, 42) == cartpole_reward(theta, 42));
    CHECK_THROWS_AS(cartpole_reward(Vector::Constant(4, std::nan("")), 0), InvalidArgument);

    // Brute-force search for a policy that holds the pole for the full episode.
    Rng rng(2024);
    bool found = false;
    Vector best;
    for (int i = 0; i < 10000 && !found; ++i) {
      Vector cand(4);
      for (int j = 0; j < 4; ++j) cand[j] = rng.uniform(-1.0, 1.0);
      if (cartpole_reward(cand, 0) == 500) {
        found = true;
        best = cand;
      }
    }
    REQUIRE(found);
    CartPole cp;
    CHECK(cp.eval_noisy(best, 0) == 500.0);
  }
}
