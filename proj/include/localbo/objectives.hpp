#pragma once

#include "localbo/box.hpp"
#include "localbo/gp.hpp"

#include <cstdint>
#include <memory>
#include <string>

namespace localbo {

enum class Sense { minimize, maximize };

/// Black-box objective over a box. Noisy evaluations are pure functions of
/// (x, eval_seed).
class Objective {
 public:
  virtual ~Objective() = default;

  virtual std::string name() const = 0;
  virtual int dim() const { return box().dim(); }
  virtual const Box& box() const = 0;
  virtual double noise_sigma() const = 0;
  virtual Sense sense() const { return Sense::minimize; }

  virtual bool has_true_value() const { return false; }
  virtual bool has_true_gradient() const { return false; }
  /// Noise-free value; throws ContractViolation if unavailable.
  virtual double true_value(PointRef x) const;
  virtual Vector true_gradient(PointRef x) const;

  /// f(x) + noise keyed by eval_seed. Throws DomainError outside the box.
  virtual double eval_noisy(PointRef x, std::uint64_t eval_seed) const;

  /// Affine map to the value an algorithm minimizes:
  /// internal = sign * (y - offset) / scale, sign = -1 when maximizing.
  double to_internal(double y) const;
  double from_internal(double v) const;
  virtual double output_offset() const { return 0.0; }
  virtual double output_scale() const { return 1.0; }

 protected:
  void check_domain(PointRef x) const;
};

/// f is a random-Fourier-feature draw from a GP prior on the unit cube.
class SyntheticGp final : public Objective {
 public:
  SyntheticGp(GpPath path, double noise_sigma);

  std::string name() const override { return "synthetic"; }
  const Box& box() const override { return box_; }
  double noise_sigma() const override { return noise_sigma_; }
  bool has_true_value() const override { return true; }
  bool has_true_gradient() const override { return true; }
  double true_value(PointRef x) const override;
  Vector true_gradient(PointRef x) const override;
  const GpPath& path() const { return path_; }

 private:
  GpPath path_;
  double noise_sigma_;
  Box box_;
};

std::unique_ptr<SyntheticGp> make_synthetic(const KernelSpec& kernel, double noise_sigma, int num_features,
                                            std::uint64_t seed);

/// sum_i x_i^2 on a symmetric box.
class Sphere final : public Objective {
 public:
  Sphere(int dim, double half_width = 5.0, double noise_sigma = 0.0);
  std::string name() const override { return "sphere"; }
  const Box& box() const override { return box_; }
  double noise_sigma() const override { return noise_sigma_; }
  bool has_true_value() const override { return true; }
  bool has_true_gradient() const override { return true; }
  double true_value(PointRef x) const override;
  Vector true_gradient(PointRef x) const override;

 private:
  Box box_;
  double noise_sigma_;
};

/// sum_i 100 (x_{i+1} - x_i^2)^2 + (1 - x_i)^2.
class Rosenbrock final : public Objective {
 public:
  Rosenbrock(int dim, double half_width = 2.0, double noise_sigma = 0.0);
  std::string name() const override { return "rosenbrock"; }
  const Box& box() const override { return box_; }
  double noise_sigma() const override { return noise_sigma_; }
  bool has_true_value() const override { return true; }
  bool has_true_gradient() const override { return true; }
  double true_value(PointRef x) const override;
  Vector true_gradient(PointRef x) const override;

 private:
  Box box_;
  double noise_sigma_;
};

struct CartPoleParams {
  double gravity = 9.8;
  double cart_mass = 1.0;
  double pole_mass = 0.1;
  double half_length = 0.5;
  double force = 10.0;
  double tau = 0.02;
  int max_steps = 500;
  double angle_limit = 12.0 * 2.0 * 3.14159265358979323846 / 360.0;
  double position_limit = 2.4;
  double init_range = 0.05;
};

/// Number of steps a linear threshold policy keeps the pole up. The action
/// pushes right when <theta, state> > 0, with state (x, x_dot, angle, angle_dot).
int cartpole_reward(PointRef theta, std::uint64_t episode_seed, const CartPoleParams& params = {});

/// Episode reward of a 4-parameter linear policy; maximized. Noise comes only
/// from the seeded initial state.
class CartPole final : public Objective {
 public:
  explicit CartPole(double half_width = 1.0, CartPoleParams params = {});
  std::string name() const override { return "cartpole"; }
  const Box& box() const override { return box_; }
  double noise_sigma() const override { return 0.0; }
  Sense sense() const override { return Sense::maximize; }
  double eval_noisy(PointRef x, std::uint64_t eval_seed) const override;
  double output_offset() const override { return 0.5 * params_.max_steps; }
  double output_scale() const override { return 0.5 * params_.max_steps; }
  const CartPoleParams& params() const { return params_; }

 private:
  Box box_;
  CartPoleParams params_;
};

}  // namespace localbo
