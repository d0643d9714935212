#pragma once

#include <span>
#include <vector>

#include "cfl/matrix.hpp"

namespace cfl {

/// Sample Pearson correlation, clamped to [-1, 1].
/// Throws DegenerateError when either column has zero variance, ShapeError on
/// unequal lengths or fewer than two values.
double pearson(std::span<const double> x, std::span<const double> y);

// Population (1/n) covariance of the columns of m, rows are samples.
Matrix covariance(const Matrix& m);

std::vector<double> column_means(const Matrix& m);

}  // namespace cfl
