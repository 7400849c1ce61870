#pragma once

#include "localbo/core.hpp"

namespace localbo {

/// Axis-aligned closed box [lower, upper] in input space.
class Box {
 public:
  Box() = default;
  Box(Vector lower, Vector upper);

  static Box unit(int dim);
  static Box uniform(int dim, double lower, double upper);

  int dim() const { return static_cast<int>(lower_.size()); }
  const Vector& lower() const { return lower_; }
  const Vector& upper() const { return upper_; }
  Vector width() const { return upper_ - lower_; }
  Vector center() const { return 0.5 * (lower_ + upper_); }

  bool contains(PointRef x, double tol = 0.0) const;
  Vector project(PointRef x) const;

  /// Maps a point of [0,1]^d affinely into the box.
  Vector from_unit(PointRef u) const;

 private:
  Vector lower_;
  Vector upper_;
};

}  // namespace localbo
