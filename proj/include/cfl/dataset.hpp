#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cfl/matrix.hpp"
#include "cfl/rng.hpp"

namespace cfl {

/// A labelled tabular dataset. `row_ids` is the global ordered index; it is
/// the only key linking the same sample across silos.
struct Table {
  std::string name;
  std::vector<std::string> feature_names;
  Matrix features;
  std::vector<int> labels;
  std::vector<std::size_t> row_ids;
  // class_names[k] is the source label that maps to id k.
  std::vector<std::string> class_names;

  std::size_t rows() const { return features.rows(); }
  std::size_t num_features() const { return features.cols(); }
  std::size_t num_classes() const { return class_names.size(); }

  // Throws DataError if the structural invariants do not hold.
  void validate() const;
};

struct SplitTable {
  Table train;
  Table test;
  double split_rate = 0.3;
};

// Reads a header-first CSV. Every column other than `label_column` must be
// numeric; labels are mapped to dense ids in order of first appearance.
Table load_csv(const std::filesystem::path& path, std::string_view label_column);

/// Per-column affine map to [0, 1] fitted on one matrix and applicable to
/// another. Constant columns map to 0.5.
struct MinMaxScaler {
  std::vector<double> lo;
  std::vector<double> hi;

  static MinMaxScaler fit(const Matrix& m);
  Matrix apply(const Matrix& m) const;
};

Table minmax_normalize(const Table& t);

// Number of training rows for a split: round-half-up of rate * m, kept
// within [1, m - 1].
std::size_t train_rows_for(std::size_t m, double rate);
SplitTable train_test_split(const Table& t, double rate, RngStream& rng);

// Rows at the given positions, in the given order. Keeps row ids and class
// names.
Table take_rows(const Table& t, std::span<const std::size_t> positions);

// Uniform sample of n rows without replacement, kept in original order.
Table subsample(const Table& t, std::size_t n, RngStream& rng);

/// Gaussian class blobs. Class k is centred at +-margin along axis k / 2 and
/// row r belongs to class r % classes, so counts are balanced within one.
Table synth_table(std::size_t m, std::size_t d, std::size_t classes, RngStream& rng,
                  double margin = 8.0);

}  // namespace cfl
