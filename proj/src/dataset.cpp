#include "cfl/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <unordered_map>

#include "cfl/error.hpp"

namespace cfl {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cell.push_back('"');
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cell.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      cells.push_back(std::move(cell));
      cell.clear();
    } else {
      cell.push_back(ch);
    }
  }
  cells.push_back(std::move(cell));
  return cells;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

}  // namespace

void Table::validate() const {
  const std::size_t m = features.rows();
  if (labels.size() != m || row_ids.size() != m)
    throw DataError("table '" + name + "': features, labels and row ids disagree in length");
  if (feature_names.size() != features.cols())
    throw DataError("table '" + name + "': feature name count does not match column count");
  std::vector<std::size_t> counts(class_names.size(), 0);
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= class_names.size())
      throw DataError("table '" + name + "': label id out of range");
    ++counts[static_cast<std::size_t>(y)];
  }
  for (std::size_t k = 0; k < counts.size(); ++k)
    if (counts[k] == 0) throw DataError("table '" + name + "': class " + class_names[k] + " is empty");
}

Table load_csv(const std::filesystem::path& path, std::string_view label_column) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset " + path.string());

  std::string line;
  if (!std::getline(in, line) || trim(line).empty())
    throw DataError("dataset " + path.string() + " is empty");
  const auto header = split_csv_line(line);
  std::size_t label_idx = header.size();
  for (std::size_t i = 0; i < header.size(); ++i)
    if (trim(header[i]) == label_column) label_idx = i;
  if (label_idx == header.size())
    throw DataError("dataset " + path.string() + " has no column named '" +
                    std::string(label_column) + "'");

  Table t;
  t.name = path.stem().string();
  for (std::size_t i = 0; i < header.size(); ++i)
    if (i != label_idx) t.feature_names.emplace_back(trim(header[i]));
  const std::size_t d = t.feature_names.size();

  std::unordered_map<std::string, int> class_ids;
  std::vector<double> values;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size())
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                      std::to_string(header.size()) + " cells, found " +
                      std::to_string(cells.size()));
    for (std::size_t i = 0; i < cells.size(); ++i) {
      const auto cell = trim(cells[i]);
      if (i == label_idx) {
        if (cell.empty())
          throw DataError(path.string() + ":" + std::to_string(line_no) + ": missing label");
        auto [it, inserted] =
            class_ids.try_emplace(std::string(cell), static_cast<int>(class_ids.size()));
        if (inserted) t.class_names.emplace_back(cell);
        t.labels.push_back(it->second);
        continue;
      }
      double v = 0.0;
      const auto* end = cell.data() + cell.size();
      auto [ptr, ec] = std::from_chars(cell.data(), end, v);
      if (cell.empty() || ec != std::errc() || ptr != end || !std::isfinite(v))
        throw DataError(path.string() + ":" + std::to_string(line_no) + ": column '" +
                        std::string(trim(header[i])) + "' has non-numeric value '" +
                        std::string(cell) + "'");
      values.push_back(v);
    }
  }
  const std::size_t m = t.labels.size();
  if (m == 0) throw DataError("dataset " + path.string() + " has no data rows");
  t.features = Matrix(m, d, std::move(values));
  t.row_ids.resize(m);
  std::iota(t.row_ids.begin(), t.row_ids.end(), std::size_t{1});
  t.validate();
  return t;
}

MinMaxScaler MinMaxScaler::fit(const Matrix& m) {
  MinMaxScaler s;
  s.lo.assign(m.cols(), 0.0);
  s.hi.assign(m.cols(), 0.0);
  for (std::size_t c = 0; c < m.cols(); ++c) {
    double lo = m.rows() ? m(0, c) : 0.0;
    double hi = lo;
    for (std::size_t r = 1; r < m.rows(); ++r) {
      lo = std::min(lo, m(r, c));
      hi = std::max(hi, m(r, c));
    }
    s.lo[c] = lo;
    s.hi[c] = hi;
  }
  return s;
}

Matrix MinMaxScaler::apply(const Matrix& m) const {
  if (m.cols() != lo.size())
    throw ShapeError("MinMaxScaler: fitted on " + std::to_string(lo.size()) +
                     " columns, applied to " + m.shape_string());
  Matrix out(m.rows(), m.cols());
  for (std::size_t c = 0; c < m.cols(); ++c) {
    const double span = hi[c] - lo[c];
    for (std::size_t r = 0; r < m.rows(); ++r)
      out(r, c) = span > 0.0 ? (m(r, c) - lo[c]) / span : 0.5;
  }
  return out;
}

Table minmax_normalize(const Table& t) {
  Table out = t;
  out.features = MinMaxScaler::fit(t.features).apply(t.features);
  return out;
}

std::size_t train_rows_for(std::size_t m, double rate) {
  auto n = static_cast<std::size_t>(std::floor(rate * static_cast<double>(m) + 0.5));
  return std::clamp<std::size_t>(n, 1, m - 1);
}

Table take_rows(const Table& t, std::span<const std::size_t> positions) {
  Table out;
  out.name = t.name;
  out.feature_names = t.feature_names;
  out.class_names = t.class_names;
  out.features = select_rows(t.features, positions);
  out.labels.reserve(positions.size());
  out.row_ids.reserve(positions.size());
  for (std::size_t p : positions) {
    out.labels.push_back(t.labels[p]);
    out.row_ids.push_back(t.row_ids[p]);
  }
  return out;
}

SplitTable train_test_split(const Table& t, double rate, RngStream& rng) {
  if (!(rate > 0.0 && rate < 1.0))
    throw ConfigError("split rate must lie in (0, 1), got " + std::to_string(rate));
  const std::size_t m = t.rows();
  if (m < 2) throw DataError("cannot split a table with fewer than two rows");
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(std::span(order));
  const std::size_t n_train = train_rows_for(m, rate);
  std::vector<std::size_t> train(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> test(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return SplitTable{take_rows(t, train), take_rows(t, test), rate};
}

Table subsample(const Table& t, std::size_t n, RngStream& rng) {
  if (n >= t.rows()) return t;
  std::vector<std::size_t> order(t.rows());
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(std::span(order));
  order.resize(n);
  std::sort(order.begin(), order.end());
  return take_rows(t, order);
}

Table synth_table(std::size_t m, std::size_t d, std::size_t classes, RngStream& rng,
                  double margin) {
  if (classes < 2 || d < 2 || m < classes)
    throw DataError("synth_table: need m >= classes >= 2 and d >= 2");
  if (classes > 2 * d)
    throw DataError("synth_table: at most 2*d classes fit on the axis layout");
  Table t;
  t.name = "synth";
  for (std::size_t c = 0; c < d; ++c) t.feature_names.push_back("f" + std::to_string(c));
  for (std::size_t k = 0; k < classes; ++k) t.class_names.push_back("c" + std::to_string(k));
  t.features = Matrix(m, d);
  t.labels.resize(m);
  t.row_ids.resize(m);
  for (std::size_t r = 0; r < m; ++r) {
    const std::size_t k = r % classes;
    t.labels[r] = static_cast<int>(k);
    t.row_ids[r] = r + 1;
    for (std::size_t c = 0; c < d; ++c) t.features(r, c) = rng.normal();
    t.features(r, k / 2) += (k % 2 == 0 ? margin : -margin);
  }
  return t;
}

}  // namespace cfl
