#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "cfl/dataset.hpp"
#include "cfl/matrix.hpp"
#include "cfl/rng.hpp"

namespace cfl {

/// One silo's vertical slice of a table, indexed by the full global row set.
/// Rows the silo does not hold are zero-filled and flagged absent.
struct SiloView {
  int silo_id = 1;  // 1-based
  std::vector<std::string> feature_names;
  Matrix features;  // m x d_i
  std::vector<int> labels;
  std::vector<std::size_t> row_ids;
  std::vector<std::uint8_t> present;
  // column_order[j] = index (in the partitioned slice) of the column now at j.
  std::vector<std::size_t> column_order;
  // Columns of the source table this silo received, in partition order.
  std::vector<std::size_t> source_columns;
  std::vector<int> retained_classes;
  std::size_t num_classes = 0;

  std::size_t rows() const { return features.rows(); }
  std::size_t width() const { return features.cols(); }
  std::size_t present_count() const;
  std::vector<std::size_t> present_rows() const;
};

// Silo i (1-based) receives columns [(i-1)*k, i*k); leftover columns are
// dropped. All rows start present.
std::vector<SiloView> vertical_partition(const Table& t, std::size_t n_silos,
                                         std::size_t features_per_silo);

struct PearsonOrder {
  std::vector<std::size_t> order;
  std::vector<double> scores;  // per original column
  bool degenerate = false;     // every column constant: identity returned
};

/// Score each column by its mean |pearson| against the other columns over the
/// present rows (pairs involving a constant column are skipped), then sort
/// descending with ties kept in original order.
PearsonOrder pearson_order(const SiloView& v);

// Permute columns; `order` is relative to the view's current columns and is
// composed into column_order.
SiloView apply_column_order(const SiloView& v, const std::vector<std::size_t>& order);

SiloView pearson_reorder(const SiloView& v);

enum class ImbalanceMode { standard, data_size, class_size, mixed };

struct ImbalanceSpec {
  double client_drop_rate = 0.25;
  double data_drop_rate = 0.5;
  double class_drop_rate = 0.5;
  ImbalanceMode mode = ImbalanceMode::standard;

  void validate() const;
};

// floor(n * rate), tolerant of rates like 0.3 that are inexact in binary.
std::size_t affected_silo_count(std::size_t n_silos, double rate);

/// The first floor(N * c_d) silos lose round(d_d * present) of their present
/// rows, chosen uniformly. Per-silo draws use stream (silo_id, 0, data_drop).
std::vector<SiloView> inject_data_size_imbalance(std::vector<SiloView> views,
                                                 double client_drop_rate,
                                                 double data_drop_rate,
                                                 const RngStream& rng);

/// The first floor(N * c_i) silos keep only rows whose label lies in a random
/// subset of floor(C * (1 - l_i)) classes.
std::vector<SiloView> inject_class_size_imbalance(std::vector<SiloView> views,
                                                  double client_rate,
                                                  double class_drop_rate,
                                                  const RngStream& rng);

std::vector<SiloView> apply_imbalance(std::vector<SiloView> views, const ImbalanceSpec& spec,
                                      const RngStream& rng);

struct ZeroFillReport {
  std::size_t rows = 0;
  std::size_t filled_rows = 0;        // absent rows, all zero
  std::size_t zero_present_rows = 0;  // present rows whose values happen to be all zero
  double filled_fraction() const {
    return rows ? static_cast<double>(filled_rows) / static_cast<double>(rows) : 0.0;
  }
};

// Throws CorruptionError if an absent row carries a non-zero value.
ZeroFillReport zero_fill_check(const SiloView& v);

struct CovDevConfig {
  std::size_t rows_per_silo = 500;
  std::size_t features = 8;
  double drop_rate = 0.3;
  // Silos whose local deviation exceeds the cap are redrawn; <= 0 disables.
  double delta_cap = 0.0;
  // Spread of the per-silo means; silos are non-IID when > 0.
  double mean_spread = 1.0;
};

struct CovDevPoint {
  std::size_t silos = 0;
  double deviation = 0.0;  // ||Sigma_true - Sigma_imp||_F of the pooled average
  double bound = 0.0;      // (1/M) sum of local deviations
};

/// Draws `max_silos` synthetic silos once, zero-fills a fraction of each
/// silo's rows, and evaluates the pooled covariance deviation on the first M
/// silos for every M in `silo_counts`.
std::vector<CovDevPoint> covariance_deviation_experiment(std::span<const std::size_t> silo_counts,
                                                         const CovDevConfig& cfg,
                                                         RngStream& rng);

}  // namespace cfl
