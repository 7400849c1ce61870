#include "localbo/box.hpp"

#include <cmath>

namespace localbo {

Box::Box(Vector lower, Vector upper) : lower_(std::move(lower)), upper_(std::move(upper)) {
  if (lower_.size() == 0) throw InvalidArgument("box must have dimension >= 1");
  require_dim(upper_.size(), lower_.size(), "box bounds");
  for (Eigen::Index i = 0; i < lower_.size(); ++i) {
    if (!(lower_[i] < upper_[i]) || !std::isfinite(lower_[i]) || !std::isfinite(upper_[i]))
      throw InvalidArgument("box requires finite lower < upper in every dimension");
  }
}

Box Box::unit(int dim) { return uniform(dim, 0.0, 1.0); }

Box Box::uniform(int dim, double lower, double upper) {
  if (dim < 1) throw InvalidArgument("box must have dimension >= 1");
  return Box(Vector::Constant(dim, lower), Vector::Constant(dim, upper));
}

bool Box::contains(PointRef x, double tol) const {
  if (x.size() != lower_.size()) return false;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (!(x[i] >= lower_[i] - tol && x[i] <= upper_[i] + tol)) return false;
  }
  return true;
}

Vector Box::project(PointRef x) const {
  require_dim(x.size(), lower_.size(), "box project");
  return x.cwiseMax(lower_).cwiseMin(upper_);
}

Vector Box::from_unit(PointRef u) const {
  require_dim(u.size(), lower_.size(), "box from_unit");
  return lower_ + u.cwiseProduct(upper_ - lower_);
}

}  // namespace localbo
