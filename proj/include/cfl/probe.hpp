#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "cfl/dataset.hpp"
#include "cfl/matrix.hpp"
#include "cfl/model.hpp"
#include "cfl/rng.hpp"
#include "cfl/silo.hpp"

namespace cfl {

struct ProbeConfig {
  double l2 = 1e-4;
  std::size_t max_iterations = 500;
  double tolerance = 1e-6;        // stop when the objective improves by less
  double labeled_fraction = 1.0;  // share of training rows whose labels are used

  void validate() const;
};

/// Multinomial logistic regression on standardised inputs.
struct SoftmaxProbe {
  std::size_t num_classes = 0;
  std::vector<double> mean;
  std::vector<double> scale;
  Matrix weight;  // features x classes
  std::vector<double> bias;
  // Objective after each accepted step (index 0 = initial point).
  std::vector<double> objective_history;
  // Set when the training labels held a single class: always predicts it.
  int constant_class = -1;

  Matrix logits(const Matrix& x) const;
  std::vector<int> predict(const Matrix& x) const;
};

/// Minimises mean cross-entropy + l2/2 * ||W||^2 (bias unpenalised) by
/// full-batch gradient descent with Armijo backtracking. Deterministic.
/// Throws DegenerateError if fewer than two classes occur in `labels`.
SoftmaxProbe train_probe(const Matrix& features, std::span<const int> labels, std::size_t num_classes,
                         const ProbeConfig& cfg);

// As train_probe, but a single-class training set yields a constant predictor.
SoftmaxProbe train_probe_or_constant(const Matrix& features, std::span<const int> labels,
                                     std::size_t num_classes, const ProbeConfig& cfg);

// Objective value and gradient at the probe's current parameters, on
// already-standardised inputs.
double probe_objective(const SoftmaxProbe& p, const Matrix& standardized, std::span<const int> labels,
                       double l2, Matrix* grad_weight = nullptr, std::vector<double>* grad_bias = nullptr);
Matrix standardize(const SoftmaxProbe& p, const Matrix& x);

struct Metrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Support-weighted precision, recall and F1 over the classes seen in either
/// argument. A class with no predicted members has precision 0; F1 is 0 when
/// precision + recall is 0.
Metrics weighted_metrics(std::span<const int> y_true, std::span<const int> y_pred);

enum class ModelTag { base1, cfl, base2 };
std::string to_string(ModelTag t);

struct MetricsRow {
  int silo = 0;
  ModelTag model = ModelTag::cfl;
  Metrics metrics;
};

// Positions of the training rows whose labels the probe may use.
std::vector<std::size_t> labeled_rows(const std::vector<std::size_t>& candidates, double fraction,
                                      RngStream rng);

/// Probe on encoder embeddings of the silo's present training rows, scored on
/// embeddings of every test row.
Metrics evaluate_silo(const Encoder& encoder, const SiloView& train, const SiloView& test,
                      const ProbeConfig& cfg, const RngStream& rng);

struct BaselineMetrics {
  Metrics base1;               // full-width global data
  std::vector<Metrics> base2;  // per silo, raw local columns
};

BaselineMetrics evaluate_baselines(const SplitTable& global, const std::vector<SiloView>& train_views,
                                   const std::vector<SiloView>& test_views, const ProbeConfig& cfg,
                                   const RngStream& rng);

}  // namespace cfl
