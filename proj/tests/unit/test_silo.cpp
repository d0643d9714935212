#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <iostream>
#include <sstream>

#include "cfl/error.hpp"
#include "cfl/silo.hpp"
#include "cfl/stats.hpp"

using namespace cfl;

namespace {

Table numbered_table(std::size_t m, std::size_t d, std::size_t classes = 2) {
  Table t;
  t.name = "t";
  for (std::size_t c = 0; c < d; ++c) t.feature_names.push_back("c" + std::to_string(c));
  for (std::size_t k = 0; k < classes; ++k) t.class_names.push_back("k" + std::to_string(k));
  t.features = Matrix(m, d);
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t c = 0; c < d; ++c) t.features(r, c) = 1.0 + static_cast<double>(r * d + c);
    t.labels.push_back(static_cast<int>(r % classes));
    t.row_ids.push_back(r + 1);
  }
  return t;
}

SiloView view_of(const Matrix& m) {
  Table t = numbered_table(m.rows(), m.cols());
  t.features = m;
  return vertical_partition(t, 1, m.cols())[0];
}

}  // namespace

TEST_CASE("partition slices contiguous columns and drops leftovers") {
  const Table t = numbered_table(4, 10);
  const auto views = vertical_partition(t, 3, 3);
  REQUIRE(views.size() == 3);
  CHECK(views[0].source_columns == std::vector<std::size_t>{0, 1, 2});
  CHECK(views[1].source_columns == std::vector<std::size_t>{3, 4, 5});
  CHECK(views[2].source_columns == std::vector<std::size_t>{6, 7, 8});
  for (const auto& v : views) {
    CHECK(v.rows() == 4);
    CHECK(v.present_count() == 4);
    CHECK(v.labels == t.labels);
  }
  CHECK(views[2].silo_id == 3);
  CHECK(views[1].feature_names[0] == "c3");
  std::vector<std::size_t> kept = {0, 1, 2, 3, 4, 5, 6, 7, 8};
  std::vector<Matrix> blocks;
  for (const auto& v : views) blocks.push_back(v.features);
  CHECK(hstack(blocks) == select_cols(t.features, kept));
  CHECK_THROWS_AS(vertical_partition(t, 3, 4), ConfigError);
}

TEST_CASE("Adult and covtype layouts fit") {
  CHECK(vertical_partition(numbered_table(3, 105), 5, 21).size() == 5);
  CHECK(vertical_partition(numbered_table(3, 54), 3, 18).size() == 3);
  CHECK_THROWS_AS(vertical_partition(numbered_table(3, 104), 5, 21), ConfigError);
}

TEST_CASE("perfectly correlated pair keeps its order") {
  const auto v = view_of(Matrix::from_rows({{1, 2}, {2, 4}, {3, 6.5}, {4, 8}}));
  const auto po = pearson_order(v);
  CHECK(po.order == std::vector<std::size_t>{0, 1});
  CHECK(po.scores[0] == po.scores[1]);
}

TEST_CASE("column correlated with both others comes first") {
  RngStream rng(3, {});
  Matrix m(200, 3);
  for (std::size_t r = 0; r < 200; ++r) {
    const double x = rng.normal(), z = rng.normal();
    m(r, 0) = x;
    m(r, 1) = z;
    m(r, 2) = x + z;
  }
  const auto v = view_of(m);
  const auto po = pearson_order(v);
  // Direct scores: mean |r| over the other two columns.
  const auto c0 = m.column(0), c1 = m.column(1), c2 = m.column(2);
  const double s0 = (std::abs(pearson(c0, c1)) + std::abs(pearson(c0, c2))) / 2;
  const double s2 = (std::abs(pearson(c2, c0)) + std::abs(pearson(c2, c1))) / 2;
  CHECK(po.scores[0] == doctest::Approx(s0));
  CHECK(po.scores[2] == doctest::Approx(s2));
  CHECK(po.order[0] == 2);
}

TEST_CASE("constant column scores zero and sorts last") {
  const auto v = view_of(Matrix::from_rows({{5, 1, 2}, {5, 2, 3}, {5, 3, 5}, {5, 4, 4}}));
  const auto po = pearson_order(v);
  CHECK(po.scores[0] == 0.0);
  CHECK(po.order.back() == 0);
  CHECK_FALSE(po.degenerate);
}

TEST_CASE("all-constant silo keeps identity and warns") {
  const auto v = view_of(Matrix::from_rows({{5, 1}, {5, 1}, {5, 1}}));
  std::ostringstream captured;
  auto* old = std::clog.rdbuf(captured.rdbuf());
  const auto out = pearson_reorder(v);
  std::clog.rdbuf(old);
  CHECK(out.column_order == std::vector<std::size_t>{0, 1});
  CHECK(captured.str().find("warning") != std::string::npos);
}

TEST_CASE("reordering is a permutation and test data reuse it") {
  RngStream rng(4, {});
  Matrix m(50, 6);
  for (double& x : m.data()) x = rng.normal();
  for (std::size_t r = 0; r < 50; ++r) m(r, 4) = m(r, 1) + 0.1 * m(r, 4);
  const auto v = view_of(m);
  const auto reordered = pearson_reorder(v);
  auto order = reordered.column_order;
  std::vector<std::size_t> sorted = order;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < 6; ++i) CHECK(sorted[i] == i);
  for (std::size_t j = 0; j < 6; ++j) CHECK(reordered.features.column(j) == m.column(order[j]));
  std::vector<double> before(m.data().begin(), m.data().end()), after(reordered.features.data().begin(),
                                                                       reordered.features.data().end());
  std::sort(before.begin(), before.end());
  std::sort(after.begin(), after.end());
  CHECK(before == after);
  // Scores only use present rows.
  SiloView partial = v;
  for (std::size_t r = 0; r < 25; ++r) {
    partial.present[r] = 0;
    std::fill(partial.features.row(r).begin(), partial.features.row(r).end(), 0.0);
  }
  const auto po = pearson_order(partial);
  std::vector<std::size_t> tail(25);
  std::iota(tail.begin(), tail.end(), std::size_t{25});
  const Matrix sub = select_rows(m, tail);
  const double s1 = [&] {
    double s = 0;
    for (std::size_t c = 0; c < 6; ++c)
      if (c != 1) s += std::abs(pearson(sub.column(1), sub.column(c)));
    return s / 5;
  }();
  CHECK(po.scores[1] == doctest::Approx(s1).epsilon(1e-12));
  // Composition: a second permutation composes onto column_order.
  const auto twice = apply_column_order(reordered, {5, 4, 3, 2, 1, 0});
  for (std::size_t j = 0; j < 6; ++j) CHECK(twice.column_order[j] == order[5 - j]);
}

TEST_CASE("data-size imbalance") {
  CHECK(affected_silo_count(4, 0.25) == 1);
  CHECK(affected_silo_count(5, 0.25) == 1);
  CHECK(affected_silo_count(10, 0.3) == 3);
  const Table t = numbered_table(1000, 8);
  const RngStream rng(7, {});
  auto views = inject_data_size_imbalance(vertical_partition(t, 4, 2), 0.25, 0.5, rng);
  CHECK(views[0].present_count() == 500);
  for (std::size_t i = 1; i < 4; ++i) CHECK(views[i].present_count() == 1000);
  const auto rep = zero_fill_check(views[0]);
  CHECK(rep.filled_rows == 500);
  // Deterministic for a given seed.
  auto again = inject_data_size_imbalance(vertical_partition(t, 4, 2), 0.25, 0.5, rng);
  CHECK(again[0].present == views[0].present);
  // No client dropout leaves every view untouched.
  const auto base = vertical_partition(t, 4, 2);
  auto same = inject_data_size_imbalance(base, 0.0, 0.5, rng);
  for (std::size_t i = 0; i < 4; ++i) CHECK(same[i].features == base[i].features);
}

TEST_CASE("class-size imbalance") {
  const Table t = numbered_table(400, 4, 8);
  const RngStream rng(2, {});
  const auto base = vertical_partition(t, 2, 2);
  auto views = inject_class_size_imbalance(base, 0.5, 0.5, rng);
  CHECK(views[0].retained_classes.size() == 4);
  CHECK(views[1].retained_classes.size() == 8);
  for (std::size_t r = 0; r < 400; ++r) {
    const bool kept = std::find(views[0].retained_classes.begin(), views[0].retained_classes.end(),
                                views[0].labels[r]) != views[0].retained_classes.end();
    CHECK(static_cast<bool>(views[0].present[r]) == kept);
    if (kept) CHECK(std::equal(views[0].features.row(r).begin(), views[0].features.row(r).end(),
                               base[0].features.row(r).begin()));
  }
  auto none = inject_class_size_imbalance(base, 1.0, 0.0, rng);
  for (std::size_t i = 0; i < 2; ++i) CHECK(none[i].features == base[i].features);
  const Table binary = numbered_table(10, 2, 2);
  CHECK_THROWS_AS(inject_class_size_imbalance(vertical_partition(binary, 1, 2), 1.0, 0.6, rng), ConfigError);
}

TEST_CASE("mixed applies both generators to the affected silos") {
  const Table t = numbered_table(800, 8, 4);
  const RngStream rng(5, {});
  ImbalanceSpec spec{0.25, 0.5, 0.5, ImbalanceMode::mixed};
  const auto views = apply_imbalance(vertical_partition(t, 4, 2), spec, rng);
  CHECK(views[0].retained_classes.size() == 2);
  CHECK(views[0].present_count() < 400);
  CHECK(views[1].present_count() == 800);
  CHECK_THROWS_AS(apply_imbalance(vertical_partition(t, 4, 2), ImbalanceSpec{1.5, 0, 0}, rng), ConfigError);
}

TEST_CASE("zero-fill example: a missing row reads as zeros") {
  Table t = numbered_table(4, 5);
  auto v = vertical_partition(t, 1, 5)[0];
  v.present[2] = 0;
  std::fill(v.features.row(2).begin(), v.features.row(2).end(), 0.0);
  const auto rep = zero_fill_check(v);
  CHECK(rep.filled_rows == 1);
  for (double x : v.features.row(2)) CHECK(x == 0.0);
  CHECK(zero_fill_check(vertical_partition(t, 1, 5)[0]).filled_rows == 0);
  v.features(2, 1) = 3.0;
  CHECK_THROWS_AS(zero_fill_check(v), CorruptionError);
}

TEST_CASE("75 percent drop leaves a quarter of the rows") {
  const Table t = numbered_table(2000, 2);
  const auto views = inject_data_size_imbalance(vertical_partition(t, 1, 2), 1.0, 0.75, RngStream(3, {}));
  const auto rep = zero_fill_check(views[0]);
  const double sigma = std::sqrt(0.75 * 0.25 / 2000);
  CHECK(std::abs(rep.filled_fraction() - 0.75) <= 3 * sigma);
}

TEST_CASE("misalignment keeps a common row set at the default rates") {
  const Table t = numbered_table(500, 8, 2);
  for (std::size_t n : {2, 3, 4}) {
    const auto views = apply_imbalance(vertical_partition(t, n, 2), ImbalanceSpec{0.25, 0.5, 0.5, ImbalanceMode::mixed},
                                       RngStream(1, {}));
    std::size_t common = 0;
    for (std::size_t r = 0; r < 500; ++r) {
      bool all = true;
      for (const auto& v : views) all = all && v.present[r];
      common += all;
    }
    CHECK(common > 0);
  }
}

TEST_CASE("covariance deviation: no drops means no deviation") {
  CovDevConfig cfg;
  cfg.drop_rate = 0.0;
  RngStream rng(1, {});
  const std::vector<std::size_t> counts = {1, 2, 5};
  for (const auto& p : covariance_deviation_experiment(counts, cfg, rng)) {
    CHECK(p.deviation == 0.0);
    CHECK(p.bound == 0.0);
  }
}

TEST_CASE("covariance deviation stays under the averaged local bound") {
  const std::vector<std::size_t> counts = {1, 5, 10, 25, 50};
  std::vector<double> mean(counts.size(), 0.0);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    RngStream rng(seed, {0, 0, StreamPurpose::covdev});
    const auto pts = covariance_deviation_experiment(counts, CovDevConfig{}, rng);
    REQUIRE(pts.size() == counts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
      CHECK(pts[i].deviation <= pts[i].bound + 1e-9);
      mean[i] += pts[i].deviation / 20.0;
    }
  }
  CHECK(mean.back() < mean.front());
}

TEST_CASE("delta cap bounds every local deviation") {
  CovDevConfig cfg;
  cfg.delta_cap = 1.5;
  RngStream rng(2, {});
  const std::vector<std::size_t> counts = {1, 10};
  const auto pts = covariance_deviation_experiment(counts, cfg, rng);
  for (const auto& p : pts) CHECK(p.bound <= 1.5);
  cfg.delta_cap = 1e-6;
  CHECK_THROWS_AS(covariance_deviation_experiment(counts, cfg, rng), ConfigError);
}
