#include "cfl/silo.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>

#include "cfl/error.hpp"
#include "cfl/stats.hpp"

namespace cfl {

std::size_t SiloView::present_count() const {
  return static_cast<std::size_t>(std::count(present.begin(), present.end(), std::uint8_t{1}));
}

std::vector<std::size_t> SiloView::present_rows() const {
  std::vector<std::size_t> out;
  out.reserve(present.size());
  for (std::size_t r = 0; r < present.size(); ++r)
    if (present[r]) out.push_back(r);
  return out;
}

std::vector<SiloView> vertical_partition(const Table& t, std::size_t n_silos,
                                         std::size_t features_per_silo) {
  if (n_silos == 0 || features_per_silo == 0)
    throw ConfigError("vertical_partition: need at least one silo and one feature per silo");
  if (n_silos * features_per_silo > t.num_features())
    throw ConfigError("vertical_partition: " + std::to_string(n_silos) + " silos x " +
                      std::to_string(features_per_silo) + " features exceeds the " +
                      std::to_string(t.num_features()) + " available columns");
  std::vector<SiloView> views;
  views.reserve(n_silos);
  for (std::size_t i = 0; i < n_silos; ++i) {
    SiloView v;
    v.silo_id = static_cast<int>(i + 1);
    v.source_columns.resize(features_per_silo);
    std::iota(v.source_columns.begin(), v.source_columns.end(), i * features_per_silo);
    for (std::size_t c : v.source_columns) v.feature_names.push_back(t.feature_names[c]);
    v.features = select_cols(t.features, v.source_columns);
    v.labels = t.labels;
    v.row_ids = t.row_ids;
    v.present.assign(t.rows(), 1);
    v.column_order.resize(features_per_silo);
    std::iota(v.column_order.begin(), v.column_order.end(), std::size_t{0});
    v.num_classes = t.num_classes();
    v.retained_classes.resize(t.num_classes());
    std::iota(v.retained_classes.begin(), v.retained_classes.end(), 0);
    views.push_back(std::move(v));
  }
  return views;
}

PearsonOrder pearson_order(const SiloView& v) {
  const auto rows = v.present_rows();
  const std::size_t d = v.width();
  PearsonOrder out;
  out.order.resize(d);
  std::iota(out.order.begin(), out.order.end(), std::size_t{0});
  out.scores.assign(d, 0.0);
  if (rows.size() < 2) throw DegenerateError("pearson_order: fewer than two present rows");

  const Matrix present = select_rows(v.features, rows);
  std::vector<std::vector<double>> cols(d);
  std::vector<bool> constant(d, false);
  for (std::size_t c = 0; c < d; ++c) {
    cols[c] = present.column(c);
    const auto [lo, hi] = std::minmax_element(cols[c].begin(), cols[c].end());
    constant[c] = *lo == *hi;
  }
  if (std::all_of(constant.begin(), constant.end(), [](bool b) { return b; })) {
    out.degenerate = true;
    return out;
  }

  std::vector<double> sum(d, 0.0);
  std::vector<std::size_t> pairs(d, 0);
  for (std::size_t a = 0; a < d; ++a) {
    if (constant[a]) continue;
    for (std::size_t b = a + 1; b < d; ++b) {
      if (constant[b]) continue;
      const double r = std::abs(pearson(cols[a], cols[b]));
      sum[a] += r;
      sum[b] += r;
      ++pairs[a];
      ++pairs[b];
    }
  }
  for (std::size_t c = 0; c < d; ++c)
    out.scores[c] = pairs[c] ? sum[c] / static_cast<double>(pairs[c]) : 0.0;
  std::stable_sort(out.order.begin(), out.order.end(),
                   [&](std::size_t a, std::size_t b) { return out.scores[a] > out.scores[b]; });
  return out;
}

SiloView apply_column_order(const SiloView& v, const std::vector<std::size_t>& order) {
  if (order.size() != v.width())
    throw ShapeError("apply_column_order: permutation of length " + std::to_string(order.size()) +
                     " for a view with " + std::to_string(v.width()) + " columns");
  SiloView out = v;
  out.features = select_cols(v.features, order);
  for (std::size_t j = 0; j < order.size(); ++j) {
    out.feature_names[j] = v.feature_names[order[j]];
    out.column_order[j] = v.column_order[order[j]];
  }
  return out;
}

SiloView pearson_reorder(const SiloView& v) {
  const auto po = pearson_order(v);
  if (po.degenerate)
    std::clog << "warning: silo " << v.silo_id
              << " has only constant columns; keeping the original column order\n";
  return apply_column_order(v, po.order);
}

void ImbalanceSpec::validate() const {
  for (double r : {client_drop_rate, data_drop_rate, class_drop_rate})
    if (!(r >= 0.0 && r <= 1.0)) throw ConfigError("imbalance rates must lie in [0, 1]");
}

std::size_t affected_silo_count(std::size_t n_silos, double rate) {
  return static_cast<std::size_t>(std::floor(static_cast<double>(n_silos) * rate + 1e-9));
}

namespace {

void drop_row(SiloView& v, std::size_t r) {
  v.present[r] = 0;
  std::fill(v.features.row(r).begin(), v.features.row(r).end(), 0.0);
}

}  // namespace

std::vector<SiloView> inject_data_size_imbalance(std::vector<SiloView> views,
                                                 double client_drop_rate,
                                                 double data_drop_rate,
                                                 const RngStream& rng) {
  ImbalanceSpec{client_drop_rate, data_drop_rate, 0.0}.validate();
  const std::size_t affected = std::min(views.size(), affected_silo_count(views.size(), client_drop_rate));
  for (std::size_t i = 0; i < affected; ++i) {
    SiloView& v = views[i];
    auto stream = rng.derive({static_cast<std::uint32_t>(v.silo_id), 0, StreamPurpose::data_drop});
    auto rows = v.present_rows();
    const auto n_drop = static_cast<std::size_t>(
        std::floor(data_drop_rate * static_cast<double>(rows.size()) + 0.5));
    stream.shuffle(std::span(rows));
    for (std::size_t k = 0; k < n_drop; ++k) drop_row(v, rows[k]);
  }
  return views;
}

std::vector<SiloView> inject_class_size_imbalance(std::vector<SiloView> views,
                                                  double client_rate,
                                                  double class_drop_rate,
                                                  const RngStream& rng) {
  ImbalanceSpec{client_rate, 0.0, class_drop_rate}.validate();
  const std::size_t affected = std::min(views.size(), affected_silo_count(views.size(), client_rate));
  for (std::size_t i = 0; i < affected; ++i) {
    SiloView& v = views[i];
    const std::size_t n_classes = v.num_classes;
    const auto keep = static_cast<std::size_t>(
        std::floor(static_cast<double>(n_classes) * (1.0 - class_drop_rate) + 1e-9));
    if (keep == 0)
      throw ConfigError("class drop rate " + std::to_string(class_drop_rate) + " leaves no class among " +
                        std::to_string(n_classes));
    auto stream = rng.derive({static_cast<std::uint32_t>(v.silo_id), 0, StreamPurpose::class_drop});
    std::vector<int> classes(n_classes);
    std::iota(classes.begin(), classes.end(), 0);
    stream.shuffle(std::span(classes));
    classes.resize(keep);
    std::sort(classes.begin(), classes.end());
    std::vector<std::uint8_t> kept(n_classes, 0);
    for (int k : classes) kept[static_cast<std::size_t>(k)] = 1;
    for (std::size_t r = 0; r < v.rows(); ++r)
      if (v.present[r] && !kept[static_cast<std::size_t>(v.labels[r])]) drop_row(v, r);
    v.retained_classes = classes;
  }
  return views;
}

std::vector<SiloView> apply_imbalance(std::vector<SiloView> views, const ImbalanceSpec& spec,
                                      const RngStream& rng) {
  spec.validate();
  const bool data = spec.mode == ImbalanceMode::data_size || spec.mode == ImbalanceMode::mixed;
  const bool cls = spec.mode == ImbalanceMode::class_size || spec.mode == ImbalanceMode::mixed;
  if (data)
    views = inject_data_size_imbalance(std::move(views), spec.client_drop_rate, spec.data_drop_rate, rng);
  if (cls)
    views = inject_class_size_imbalance(std::move(views), spec.client_drop_rate, spec.class_drop_rate, rng);
  return views;
}

ZeroFillReport zero_fill_check(const SiloView& v) {
  if (v.present.size() != v.rows())
    throw CorruptionError("silo " + std::to_string(v.silo_id) + ": presence mask has " +
                          std::to_string(v.present.size()) + " entries for " +
                          std::to_string(v.rows()) + " rows");
  ZeroFillReport rep;
  rep.rows = v.rows();
  for (std::size_t r = 0; r < v.rows(); ++r) {
    const auto row = v.features.row(r);
    const bool zero = std::all_of(row.begin(), row.end(), [](double x) { return x == 0.0; });
    if (!v.present[r]) {
      if (!zero)
        throw CorruptionError("silo " + std::to_string(v.silo_id) + ": absent row " +
                              std::to_string(r) + " carries non-zero values");
      ++rep.filled_rows;
    } else if (zero) {
      ++rep.zero_present_rows;
    }
  }
  return rep;
}

std::vector<CovDevPoint> covariance_deviation_experiment(std::span<const std::size_t> silo_counts,
                                                         const CovDevConfig& cfg,
                                                         RngStream& rng) {
  if (silo_counts.empty()) return {};
  const std::size_t max_silos = *std::max_element(silo_counts.begin(), silo_counts.end());
  if (max_silos < 1) throw ConfigError("covariance_deviation_experiment: need at least one silo");
  const std::size_t n = cfg.rows_per_silo, d = cfg.features;
  if (n < 2 || d < 1) throw ConfigError("covariance_deviation_experiment: need n >= 2, d >= 1");

  // Shared within-silo correlation structure: x = mu_i + L z.
  Matrix mixing(d, d);
  for (double& v : mixing.data()) v = rng.normal() / std::sqrt(static_cast<double>(d));

  std::vector<Matrix> diffs;
  std::vector<double> local;
  diffs.reserve(max_silos);
  for (std::size_t i = 0; i < max_silos; ++i) {
    for (int attempt = 0;; ++attempt) {
      Matrix x(n, d);
      std::vector<double> mu(d);
      for (double& m : mu) m = cfg.mean_spread * rng.normal();
      Matrix z(n, d);
      for (double& v : z.data()) v = rng.normal();
      x = matmul(z, mixing);
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < d; ++c) x(r, c) += mu[c];

      Matrix imputed = x;
      std::vector<std::size_t> rows(n);
      std::iota(rows.begin(), rows.end(), std::size_t{0});
      rng.shuffle(std::span(rows));
      const auto n_drop =
          static_cast<std::size_t>(std::floor(cfg.drop_rate * static_cast<double>(n) + 0.5));
      for (std::size_t k = 0; k < n_drop; ++k)
        std::fill(imputed.row(rows[k]).begin(), imputed.row(rows[k]).end(), 0.0);

      Matrix diff = covariance(x) - covariance(imputed);
      const double delta = frobenius_norm(diff);
      if (cfg.delta_cap > 0.0 && delta > cfg.delta_cap) {
        if (attempt >= 1000)
          throw ConfigError("covariance_deviation_experiment: delta cap too tight to satisfy");
        continue;
      }
      diffs.push_back(std::move(diff));
      local.push_back(delta);
      break;
    }
  }

  std::vector<CovDevPoint> out;
  for (std::size_t m : silo_counts) {
    if (m == 0) continue;
    // Equal n_i, so the weighted pooled average reduces to a plain mean.
    Matrix pooled(d, d);
    double bound = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      pooled = pooled + diffs[i];
      bound += local[i];
    }
    pooled = (1.0 / static_cast<double>(m)) * pooled;
    out.push_back({m, frobenius_norm(pooled), bound / static_cast<double>(m)});
  }
  return out;
}

}  // namespace cfl
