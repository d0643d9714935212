#include "cfl/probe.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>

#include "cfl/error.hpp"

namespace cfl {

namespace {

constexpr double kArmijo = 1e-4;

// Row-wise log-softmax cross-entropy; fills probabilities when requested.
double cross_entropy(const Matrix& logits, std::span<const int> labels, Matrix* probs) {
  const std::size_t n = logits.rows(), c = logits.cols();
  if (probs != nullptr) *probs = Matrix(n, c);
  double total = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    const auto row = logits.row(r);
    const double mx = *std::max_element(row.begin(), row.end());
    double denom = 0.0;
    for (double v : row) denom += std::exp(v - mx);
    const double lse = mx + std::log(denom);
    total += lse - row[static_cast<std::size_t>(labels[r])];
    if (probs != nullptr)
      for (std::size_t k = 0; k < c; ++k) (*probs)(r, k) = std::exp(row[k] - lse);
  }
  return total / static_cast<double>(n);
}

Matrix raw_logits(const Matrix& standardized, const Matrix& weight, const std::vector<double>& bias) {
  Matrix z = matmul(standardized, weight);
  for (std::size_t r = 0; r < z.rows(); ++r) {
    auto row = z.row(r);
    for (std::size_t k = 0; k < row.size(); ++k) row[k] += bias[k];
  }
  return z;
}

SoftmaxProbe constant_probe(std::size_t features, std::size_t num_classes, int cls) {
  SoftmaxProbe p;
  p.num_classes = num_classes;
  p.mean.assign(features, 0.0);
  p.scale.assign(features, 1.0);
  p.weight = Matrix(features, num_classes);
  p.bias.assign(num_classes, 0.0);
  p.constant_class = cls;
  return p;
}

}  // namespace

void ProbeConfig::validate() const {
  if (!(l2 >= 0.0)) throw ConfigError("probe l2 must be >= 0");
  if (!(labeled_fraction > 0.0 && labeled_fraction <= 1.0))
    throw ConfigError("labeled fraction must lie in (0, 1]");
  if (max_iterations == 0) throw ConfigError("probe max_iterations must be >= 1");
}

Matrix standardize(const SoftmaxProbe& p, const Matrix& x) {
  if (x.cols() != p.mean.size())
    throw ShapeError("probe expects " + std::to_string(p.mean.size()) + " features, got " + x.shape_string());
  Matrix out(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < x.cols(); ++c) out(r, c) = (x(r, c) - p.mean[c]) / p.scale[c];
  return out;
}

Matrix SoftmaxProbe::logits(const Matrix& x) const { return raw_logits(standardize(*this, x), weight, bias); }

std::vector<int> SoftmaxProbe::predict(const Matrix& x) const {
  if (constant_class >= 0) return std::vector<int>(x.rows(), constant_class);
  const Matrix z = logits(x);
  std::vector<int> out(z.rows());
  for (std::size_t r = 0; r < z.rows(); ++r) {
    const auto row = z.row(r);
    out[r] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

double probe_objective(const SoftmaxProbe& p, const Matrix& standardized, std::span<const int> labels,
                       double l2, Matrix* grad_weight, std::vector<double>* grad_bias) {
  const Matrix z = raw_logits(standardized, p.weight, p.bias);
  Matrix probs;
  const bool want_grad = grad_weight != nullptr || grad_bias != nullptr;
  double value = cross_entropy(z, labels, want_grad ? &probs : nullptr);
  double sq = 0.0;
  for (double w : p.weight.data()) sq += w * w;
  value += 0.5 * l2 * sq;
  if (!want_grad) return value;

  const auto n = static_cast<double>(standardized.rows());
  for (std::size_t r = 0; r < probs.rows(); ++r) probs(r, static_cast<std::size_t>(labels[r])) -= 1.0;
  if (grad_weight != nullptr) {
    *grad_weight = (1.0 / n) * matmul_tn(standardized, probs);
    auto g = grad_weight->data();
    auto w = p.weight.data();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += l2 * w[i];
  }
  if (grad_bias != nullptr) {
    grad_bias->assign(p.num_classes, 0.0);
    for (std::size_t r = 0; r < probs.rows(); ++r)
      for (std::size_t k = 0; k < p.num_classes; ++k) (*grad_bias)[k] += probs(r, k) / n;
  }
  return value;
}

SoftmaxProbe train_probe(const Matrix& features, std::span<const int> labels, std::size_t num_classes,
                         const ProbeConfig& cfg) {
  cfg.validate();
  if (features.rows() != labels.size())
    throw ShapeError("train_probe: " + std::to_string(labels.size()) + " labels for " +
                     features.shape_string() + " features");
  std::set<int> seen;
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= num_classes)
      throw DataError("train_probe: label " + std::to_string(y) + " out of range");
    seen.insert(y);
  }
  if (seen.size() < 2) throw DegenerateError("train_probe: training labels hold fewer than two classes");
  if (features.rows() < seen.size()) throw DegenerateError("train_probe: fewer rows than classes");

  const std::size_t d = features.cols();
  SoftmaxProbe p = constant_probe(d, num_classes, -1);
  const auto n = static_cast<double>(features.rows());
  for (std::size_t c = 0; c < d; ++c) {
    double mean = 0.0;
    for (std::size_t r = 0; r < features.rows(); ++r) mean += features(r, c);
    mean /= n;
    double var = 0.0;
    for (std::size_t r = 0; r < features.rows(); ++r) var += (features(r, c) - mean) * (features(r, c) - mean);
    const double sd = std::sqrt(var / n);
    p.mean[c] = mean;
    p.scale[c] = sd > 1e-12 ? sd : 1.0;
  }
  const Matrix x = standardize(p, features);
  // Start from the class log-priors: the exact optimum when the weights are
  // zero, which plain gradient steps reach slowly under heavy L2.
  std::vector<double> counts(num_classes, 0.0);
  for (int y : labels) counts[static_cast<std::size_t>(y)] += 1.0;
  for (std::size_t k = 0; k < num_classes; ++k) p.bias[k] = std::log(std::max(counts[k], 0.5) / n);

  Matrix gw;
  std::vector<double> gb;
  double value = probe_objective(p, x, labels, cfg.l2, &gw, &gb);
  p.objective_history.push_back(value);
  double step = 1.0;
  for (std::size_t it = 0; it < cfg.max_iterations; ++it) {
    double gnorm2 = 0.0;
    for (double g : gw.data()) gnorm2 += g * g;
    for (double g : gb) gnorm2 += g * g;
    if (gnorm2 == 0.0) break;

    SoftmaxProbe trial = p;
    double trial_value = std::numeric_limits<double>::infinity();
    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt) {
      auto tw = trial.weight.data();
      auto w = p.weight.data();
      auto g = gw.data();
      for (std::size_t i = 0; i < tw.size(); ++i) tw[i] = w[i] - step * g[i];
      for (std::size_t k = 0; k < num_classes; ++k) trial.bias[k] = p.bias[k] - step * gb[k];
      trial_value = probe_objective(trial, x, labels, cfg.l2);
      if (trial_value <= value - kArmijo * step * gnorm2) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    const double improvement = value - trial_value;
    p.weight = std::move(trial.weight);
    p.bias = std::move(trial.bias);
    value = probe_objective(p, x, labels, cfg.l2, &gw, &gb);
    p.objective_history.push_back(value);
    step *= 2.0;
    if (improvement < cfg.tolerance) break;
  }
  return p;
}

SoftmaxProbe train_probe_or_constant(const Matrix& features, std::span<const int> labels,
                                     std::size_t num_classes, const ProbeConfig& cfg) {
  std::set<int> seen(labels.begin(), labels.end());
  if (seen.size() == 1) return constant_probe(features.cols(), num_classes, *seen.begin());
  return train_probe(features, labels, num_classes, cfg);
}

Metrics weighted_metrics(std::span<const int> y_true, std::span<const int> y_pred) {
  if (y_true.size() != y_pred.size())
    throw ShapeError("weighted_metrics: label arrays differ in length");
  if (y_true.empty()) throw ShapeError("weighted_metrics: empty label arrays");
  std::map<int, std::size_t> support, predicted, correct;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    ++support[y_true[i]];
    ++predicted[y_pred[i]];
    if (y_true[i] == y_pred[i]) ++correct[y_true[i]];
    support.try_emplace(y_pred[i], 0);
  }
  Metrics m;
  const auto total = static_cast<double>(y_true.size());
  for (const auto& [cls, sup] : support) {
    if (sup == 0) continue;
    const auto tp = static_cast<double>(correct[cls]);
    const auto pred = static_cast<double>(predicted[cls]);
    const double precision = pred > 0 ? tp / pred : 0.0;
    const double recall = tp / static_cast<double>(sup);
    const double f1 = precision + recall > 0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
    const double w = static_cast<double>(sup) / total;
    m.precision += w * precision;
    m.recall += w * recall;
    m.f1 += w * f1;
  }
  return m;
}

std::string to_string(ModelTag t) {
  switch (t) {
    case ModelTag::base1:
      return "Base1";
    case ModelTag::cfl:
      return "CFL";
    case ModelTag::base2:
      return "Base2";
  }
  return "?";
}

std::vector<std::size_t> labeled_rows(const std::vector<std::size_t>& candidates, double fraction,
                                      RngStream rng) {
  if (fraction >= 1.0) return candidates;
  auto n = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(candidates.size()) + 0.5));
  n = std::max<std::size_t>(n, 1);
  std::vector<std::size_t> picked = candidates;
  rng.shuffle(std::span(picked));
  picked.resize(std::min(n, picked.size()));
  std::sort(picked.begin(), picked.end());
  return picked;
}

namespace {

Metrics fit_and_score(const Matrix& train_x, std::span<const int> train_y, const Matrix& test_x,
                      std::span<const int> test_y, std::size_t num_classes, const ProbeConfig& cfg) {
  const SoftmaxProbe probe = train_probe_or_constant(train_x, train_y, num_classes, cfg);
  const auto pred = probe.predict(test_x);
  return weighted_metrics(test_y, pred);
}

std::vector<int> gather(const std::vector<int>& labels, const std::vector<std::size_t>& rows) {
  std::vector<int> out;
  out.reserve(rows.size());
  for (std::size_t r : rows) out.push_back(labels[r]);
  return out;
}

}  // namespace

Metrics evaluate_silo(const Encoder& encoder, const SiloView& train, const SiloView& test,
                      const ProbeConfig& cfg, const RngStream& rng) {
  cfg.validate();
  if (encoder.shape.input != train.width())
    throw ShapeError("evaluate_silo: encoder expects " + std::to_string(encoder.shape.input) +
                     " features, silo " + std::to_string(train.silo_id) + " has " + std::to_string(train.width()));
  const auto rows = labeled_rows(train.present_rows(), cfg.labeled_fraction,
                                 rng.derive({static_cast<std::uint32_t>(train.silo_id), 0, StreamPurpose::label_subset}));
  const Matrix train_x = encoder.encode(select_rows(train.features, rows));
  const Matrix test_x = encoder.encode(test.features);
  return fit_and_score(train_x, gather(train.labels, rows), test_x, test.labels, train.num_classes, cfg);
}

BaselineMetrics evaluate_baselines(const SplitTable& global, const std::vector<SiloView>& train_views,
                                   const std::vector<SiloView>& test_views, const ProbeConfig& cfg,
                                   const RngStream& rng) {
  cfg.validate();
  if (train_views.size() != test_views.size())
    throw ShapeError("evaluate_baselines: train and test silo counts differ");
  BaselineMetrics out;
  {
    std::vector<std::size_t> all(global.train.rows());
    std::iota(all.begin(), all.end(), std::size_t{0});
    const auto rows = labeled_rows(all, cfg.labeled_fraction, rng.derive({0, 0, StreamPurpose::label_subset}));
    out.base1 = fit_and_score(select_rows(global.train.features, rows), gather(global.train.labels, rows),
                              global.test.features, global.test.labels, global.train.num_classes(), cfg);
  }
  for (std::size_t i = 0; i < train_views.size(); ++i) {
    const SiloView& tr = train_views[i];
    const auto rows = labeled_rows(tr.present_rows(), cfg.labeled_fraction,
                                   rng.derive({static_cast<std::uint32_t>(tr.silo_id), 0, StreamPurpose::label_subset}));
    out.base2.push_back(fit_and_score(select_rows(tr.features, rows), gather(tr.labels, rows),
                                      test_views[i].features, test_views[i].labels, tr.num_classes, cfg));
  }
  return out;
}

}  // namespace cfl
