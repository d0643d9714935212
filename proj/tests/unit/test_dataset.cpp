#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <set>

#include "cfl/dataset.hpp"
#include "cfl/error.hpp"
#include "cfl/probe.hpp"

using namespace cfl;
namespace fs = std::filesystem;

namespace {

fs::path write_tmp(const std::string& name, const std::string& text) {
  const fs::path p = fs::temp_directory_path() / ("cfl_test_" + name);
  std::ofstream(p) << text;
  return p;
}

}  // namespace

TEST_CASE("labels get ids in order of first appearance") {
  const auto p = write_tmp("abc.csv", "x,y,label\n1,2,a\n3,4,b\n5,6,a\n");
  const Table t = load_csv(p, "label");
  CHECK(t.labels == std::vector<int>{0, 1, 0});
  CHECK(t.class_names == std::vector<std::string>{"a", "b"});
  CHECK(t.row_ids == std::vector<std::size_t>{1, 2, 3});
  CHECK(t.feature_names == std::vector<std::string>{"x", "y"});
  CHECK(t.features == Matrix::from_rows({{1, 2}, {3, 4}, {5, 6}}));
}

TEST_CASE("label column may sit anywhere and cells may be quoted") {
  const auto p = write_tmp("mid.csv", "x,\"label\",y\r\n1.5,\"p,q\",-2\r\n0,r,1e3\r\n");
  const Table t = load_csv(p, "label");
  CHECK(t.class_names == std::vector<std::string>{"p,q", "r"});
  CHECK(t.features(1, 1) == 1000.0);
  CHECK(t.features(0, 0) == 1.5);
}

TEST_CASE("loader errors") {
  CHECK_THROWS_AS(load_csv("/nonexistent/cfl.csv", "label"), DataError);
  CHECK_THROWS_AS(load_csv(write_tmp("empty.csv", ""), "label"), DataError);
  CHECK_THROWS_AS(load_csv(write_tmp("nolabel.csv", "x,y\n1,2\n"), "label"), DataError);
  CHECK_THROWS_AS(load_csv(write_tmp("header_only.csv", "x,label\n"), "label"), DataError);
  CHECK_THROWS_AS(load_csv(write_tmp("missing.csv", "x,label\n,a\n"), "label"), DataError);
  CHECK_THROWS_AS(load_csv(write_tmp("ragged.csv", "x,y,label\n1,a\n"), "label"), DataError);
  try {
    load_csv(write_tmp("text.csv", "x,y,label\n1,2,a\n3,oops,b\n"), "label");
    FAIL("expected DataError");
  } catch (const DataError& e) {
    const std::string msg = e.what();
    CHECK(msg.find(":3:") != std::string::npos);
    CHECK(msg.find("'y'") != std::string::npos);
    CHECK(msg.find("oops") != std::string::npos);
  }
}

TEST_CASE("Adult CSV shape") {
  if (!fs::exists(CFL_ADULT_CSV)) {
    MESSAGE("Adult CSV not generated; skipping");
    return;
  }
  const Table t = load_csv(CFL_ADULT_CSV, "income");
  CHECK(t.rows() == 30162);
  CHECK(t.num_features() == 105);
  CHECK(t.num_classes() == 2);
}

TEST_CASE("min-max normalisation") {
  Table t;
  t.features = Matrix::from_rows({{2, 7}, {4, 7}, {6, 7}});
  t.feature_names = {"a", "b"};
  t.labels = {0, 1, 0};
  t.row_ids = {1, 2, 3};
  t.class_names = {"x", "y"};
  const Table n = minmax_normalize(t);
  CHECK(n.features.column(0) == std::vector<double>{0, 0.5, 1});
  CHECK(n.features.column(1) == std::vector<double>{0.5, 0.5, 0.5});
}

TEST_CASE("normalising twice equals normalising once") {
  RngStream rng(5, {});
  Table t = synth_table(200, 6, 3, rng);
  const Table once = minmax_normalize(t);
  const Table twice = minmax_normalize(once);
  for (std::size_t i = 0; i < once.features.size(); ++i) {
    CHECK(once.features.data()[i] >= 0.0);
    CHECK(once.features.data()[i] <= 1.0);
    CHECK(std::abs(once.features.data()[i] - twice.features.data()[i]) < 1e-15);
  }
}

TEST_CASE("scaler fitted on train applies train statistics to test") {
  const auto s = MinMaxScaler::fit(Matrix::from_rows({{0}, {10}}));
  CHECK(s.apply(Matrix::from_rows({{5}, {20}})) == Matrix::from_rows({{0.5}, {2.0}}));
  CHECK_THROWS_AS((void)s.apply(Matrix(1, 2)), ShapeError);
}

TEST_CASE("train/test split sizes") {
  CHECK(train_rows_for(10, 0.3) == 3);
  // 0.3 * 30162 = 9048.6 rounds to 9049.
  CHECK(train_rows_for(30162, 0.3) == 9049);
  CHECK(train_rows_for(2, 0.01) == 1);
  CHECK(train_rows_for(2, 0.99) == 1);
}

TEST_CASE("split partitions the index and is deterministic") {
  RngStream gen(1, {});
  const Table t = synth_table(10, 3, 2, gen);
  RngStream a(42, {0, 0, StreamPurpose::split}), b(42, {0, 0, StreamPurpose::split});
  const SplitTable s1 = train_test_split(t, 0.3, a), s2 = train_test_split(t, 0.3, b);
  CHECK(s1.train.rows() == 3);
  CHECK(s1.test.rows() == 7);
  CHECK(s1.train.row_ids == s2.train.row_ids);
  CHECK(s1.test.row_ids == s2.test.row_ids);
  std::set<std::size_t> all(s1.train.row_ids.begin(), s1.train.row_ids.end());
  all.insert(s1.test.row_ids.begin(), s1.test.row_ids.end());
  CHECK(all.size() == 10);
  CHECK(*all.begin() == 1);
  CHECK(*all.rbegin() == 10);
  // Rows follow their ids.
  for (std::size_t i = 0; i < s1.train.rows(); ++i) {
    const std::size_t src = s1.train.row_ids[i] - 1;
    CHECK(s1.train.labels[i] == t.labels[src]);
    CHECK(s1.train.features(i, 2) == t.features(src, 2));
  }
  RngStream c(42, {});
  CHECK_THROWS_AS(train_test_split(t, 0.0, c), ConfigError);
  CHECK_THROWS_AS(train_test_split(t, 1.0, c), ConfigError);
}

TEST_CASE("synthetic blobs") {
  RngStream a(3, {}), b(3, {});
  const Table t = synth_table(100, 3, 3, a);
  CHECK(t.features == synth_table(100, 3, 3, b).features);
  std::vector<int> counts(3, 0);
  for (int y : t.labels) ++counts[y];
  CHECK(counts == std::vector<int>{34, 33, 33});
  RngStream c(1, {});
  CHECK_THROWS_AS(synth_table(1, 3, 2, c), DataError);
  CHECK_THROWS_AS(synth_table(10, 2, 5, c), DataError);
}

TEST_CASE("well separated blobs are learnt perfectly by the probe") {
  RngStream rng(9, {});
  const Table t = synth_table(100, 4, 2, rng, 12.0);
  const auto probe = train_probe(t.features, t.labels, 2, ProbeConfig{});
  const auto pred = probe.predict(t.features);
  CHECK(pred == t.labels);
}

TEST_CASE("subsample keeps order and size") {
  RngStream gen(2, {});
  const Table t = synth_table(50, 2, 2, gen);
  RngStream rng(1, {});
  const Table s = subsample(t, 20, rng);
  CHECK(s.rows() == 20);
  CHECK(std::is_sorted(s.row_ids.begin(), s.row_ids.end()));
  CHECK(subsample(t, 80, rng).rows() == 50);
}
