#pragma once

#include "localbo/box.hpp"
#include "localbo/core.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

namespace localbo {

struct OptOptions {
  int restarts = 8;
  int max_iterations = 200;
  double gradient_tolerance = 1e-8;
  /// Central-difference step as a fraction of each box width.
  double fd_relative_step = 1e-6;
  std::uint64_t seed = 0;
  /// Starting points tried before the low-discrepancy fill.
  std::vector<Vector> warm_starts;
  /// Anchor for tie-breaking between equal values; defaults to the first
  /// warm start.
  std::optional<Vector> reference;
};

struct OptReport {
  Vector x_star;
  double f_star = 0.0;
  int restarts_used = 0;
  std::vector<bool> converged;
  long evaluations = 0;
};

struct MatrixOptReport {
  Matrix z_star;
  double value = 0.0;
  int restarts_used = 0;
  std::vector<bool> converged;
  long evaluations = 0;
};

using ObjectiveFn = std::function<double(const Vector&)>;
/// Returns f(x) and writes the gradient into the second argument.
using ValueGradFn = std::function<double(const Vector&, Vector&)>;
using MatrixObjectiveFn = std::function<double(const Matrix&)>;
using MatrixValueGradFn = std::function<double(const Matrix&, Matrix&)>;

/// Multi-start projected BFGS over a box. Without a gradient callable the
/// gradient is taken by central differences that stay inside the box.
/// Deterministic for a given seed. Throws OptFailure when every start yields
/// a non-finite value.
OptReport minimize(const ObjectiveFn& objective, const Box& box, const OptOptions& options);
OptReport minimize(const ValueGradFn& objective, const Box& box, const OptOptions& options);

/// Minimization over b x d matrices whose rows each live in row_box.
/// Rows are flattened row-major into a b*d vector.
MatrixOptReport minimize_matrix(const MatrixObjectiveFn& objective, const Box& row_box, int rows,
                                const OptOptions& options, const std::vector<Matrix>& warm_starts = {});
MatrixOptReport minimize_matrix(const MatrixValueGradFn& objective, const Box& row_box, int rows,
                                const OptOptions& options, const std::vector<Matrix>& warm_starts = {});

/// Scrambled (randomly shifted) Sobol points in [0,1]^dim, one per row.
Matrix scrambled_sobol(int count, int dim, std::uint64_t seed);

Vector flatten_rows(const Matrix& z);
Matrix unflatten_rows(const Vector& v, int rows, int cols);

}  // namespace localbo
