#include "localbo/objectives.hpp"

#include "localbo/random.hpp"

#include <cmath>
#include <sstream>

namespace localbo {

namespace {

// Stream tag separating observation noise from other uses of an eval seed.
constexpr std::uint64_t kNoiseStream = 0x6e6f697365ULL;

}  // namespace

double Objective::true_value(PointRef) const {
  throw ContractViolation(name() + " has no noise-free value");
}

Vector Objective::true_gradient(PointRef) const {
  throw ContractViolation(name() + " has no analytic gradient");
}

void Objective::check_domain(PointRef x) const {
  require_dim(x.size(), dim(), "objective input");
  if (!x.allFinite() || !box().contains(x, 1e-12)) {
    std::ostringstream msg;
    msg << name() << ": input outside the domain box";
    throw DomainError(msg.str());
  }
}

double Objective::eval_noisy(PointRef x, std::uint64_t eval_seed) const {
  check_domain(x);
  const double f = true_value(x);
  if (noise_sigma() == 0.0) return f;
  Rng rng(derive_seed(eval_seed, kNoiseStream));
  return f + noise_sigma() * rng.normal();
}

double Objective::to_internal(double y) const {
  const double sign = sense() == Sense::maximize ? -1.0 : 1.0;
  return sign * (y - output_offset()) / output_scale();
}

double Objective::from_internal(double v) const {
  const double sign = sense() == Sense::maximize ? -1.0 : 1.0;
  return sign * v * output_scale() + output_offset();
}

// ---------------------------------------------------------------------------

SyntheticGp::SyntheticGp(GpPath path, double noise_sigma)
    : path_(std::move(path)), noise_sigma_(noise_sigma), box_(Box::unit(path_.dim())) {
  if (!(noise_sigma_ >= 0.0)) throw InvalidArgument("noise_sigma must be nonnegative");
}

double SyntheticGp::true_value(PointRef x) const {
  require_dim(x.size(), dim(), "synthetic objective");
  return path_.value(x);
}

Vector SyntheticGp::true_gradient(PointRef x) const {
  require_dim(x.size(), dim(), "synthetic objective");
  return path_.gradient(x);
}

std::unique_ptr<SyntheticGp> make_synthetic(const KernelSpec& kernel, double noise_sigma, int num_features,
                                            std::uint64_t seed) {
  return std::make_unique<SyntheticGp>(sample_prior_path(kernel, num_features, seed), noise_sigma);
}

// ---------------------------------------------------------------------------

Sphere::Sphere(int dim, double half_width, double noise_sigma)
    : box_(Box::uniform(dim, -half_width, half_width)), noise_sigma_(noise_sigma) {
  if (!(noise_sigma_ >= 0.0)) throw InvalidArgument("noise_sigma must be nonnegative");
}

double Sphere::true_value(PointRef x) const {
  require_dim(x.size(), dim(), "sphere");
  return x.squaredNorm();
}

Vector Sphere::true_gradient(PointRef x) const {
  require_dim(x.size(), dim(), "sphere");
  return 2.0 * x;
}

Rosenbrock::Rosenbrock(int dim, double half_width, double noise_sigma)
    : box_(Box::uniform(dim, -half_width, half_width)), noise_sigma_(noise_sigma) {
  if (dim < 2) throw InvalidArgument("rosenbrock needs dim >= 2");
  if (!(noise_sigma_ >= 0.0)) throw InvalidArgument("noise_sigma must be nonnegative");
}

double Rosenbrock::true_value(PointRef x) const {
  require_dim(x.size(), dim(), "rosenbrock");
  double f = 0.0;
  for (Eigen::Index i = 0; i + 1 < x.size(); ++i) {
    const double a = x[i + 1] - x[i] * x[i];
    const double b = 1.0 - x[i];
    f += 100.0 * a * a + b * b;
  }
  return f;
}

Vector Rosenbrock::true_gradient(PointRef x) const {
  require_dim(x.size(), dim(), "rosenbrock");
  Vector g = Vector::Zero(x.size());
  for (Eigen::Index i = 0; i + 1 < x.size(); ++i) {
    const double a = x[i + 1] - x[i] * x[i];
    g[i] += -400.0 * x[i] * a - 2.0 * (1.0 - x[i]);
    g[i + 1] += 200.0 * a;
  }
  return g;
}

// ---------------------------------------------------------------------------

int cartpole_reward(PointRef theta, std::uint64_t episode_seed, const CartPoleParams& p) {
  require_dim(theta.size(), 4, "cartpole policy");
  if (!theta.allFinite()) throw InvalidArgument("cartpole policy parameters must be finite");
  Rng rng(episode_seed);
  double s[4];
  for (double& v : s) v = rng.uniform(-p.init_range, p.init_range);
  const double total_mass = p.cart_mass + p.pole_mass;
  const double pole_moment = p.pole_mass * p.half_length;
  int reward = 0;
  while (reward < p.max_steps) {
    const double act = theta[0] * s[0] + theta[1] * s[1] + theta[2] * s[2] + theta[3] * s[3];
    const double force = act > 0.0 ? p.force : -p.force;
    const double cos_a = std::cos(s[2]);
    const double sin_a = std::sin(s[2]);
    const double temp = (force + pole_moment * s[3] * s[3] * sin_a) / total_mass;
    const double angle_acc = (p.gravity * sin_a - cos_a * temp) /
                             (p.half_length * (4.0 / 3.0 - p.pole_mass * cos_a * cos_a / total_mass));
    const double x_acc = temp - pole_moment * angle_acc * cos_a / total_mass;
    s[0] += p.tau * s[1];
    s[1] += p.tau * x_acc;
    s[2] += p.tau * s[3];
    s[3] += p.tau * angle_acc;
    ++reward;
    if (!(std::isfinite(s[0]) && std::isfinite(s[1]) && std::isfinite(s[2]) && std::isfinite(s[3]))) break;
    if (std::abs(s[0]) > p.position_limit || std::abs(s[2]) > p.angle_limit) break;
  }
  return reward;
}

CartPole::CartPole(double half_width, CartPoleParams params)
    : box_(Box::uniform(4, -half_width, half_width)), params_(params) {}

double CartPole::eval_noisy(PointRef x, std::uint64_t eval_seed) const {
  check_domain(x);
  return static_cast<double>(cartpole_reward(x, eval_seed, params_));
}

}  // namespace localbo
