#include "cfl/stats.hpp"

#include <algorithm>
#include <cmath>

#include "cfl/error.hpp"

namespace cfl {

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size())
    throw ShapeError("pearson: lengths differ (" + std::to_string(x.size()) + " vs " +
                     std::to_string(y.size()) + ")");
  if (x.size() < 2) throw ShapeError("pearson: need at least two values");
  const auto n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx <= 0.0 || syy <= 0.0) throw DegenerateError("pearson: constant column");
  // sqrt(sxx) * sqrt(syy) rather than sqrt(sxx * syy) keeps the result
  // symmetric in (x, y) bit for bit.
  const double r = sxy / (std::sqrt(sxx) * std::sqrt(syy));
  return std::clamp(r, -1.0, 1.0);
}

std::vector<double> column_means(const Matrix& m) {
  std::vector<double> mean(m.cols(), 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    for (std::size_t c = 0; c < m.cols(); ++c) mean[c] += row[c];
  }
  for (double& v : mean) v /= static_cast<double>(m.rows());
  return mean;
}

Matrix covariance(const Matrix& m) {
  if (m.rows() < 2)
    throw DegenerateError("covariance: need at least two rows, got " + std::to_string(m.rows()));
  const std::size_t d = m.cols();
  const auto mean = column_means(m);
  Matrix cov(d, d);
  std::vector<double> centered(d);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    for (std::size_t c = 0; c < d; ++c) centered[c] = row[c] - mean[c];
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = i; j < d; ++j) cov(i, j) += centered[i] * centered[j];
  }
  const auto n = static_cast<double>(m.rows());
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i; j < d; ++j) {
      cov(i, j) /= n;
      cov(j, i) = cov(i, j);
    }
  return cov;
}

}  // namespace cfl
