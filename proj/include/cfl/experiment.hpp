#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "cfl/config.hpp"
#include "cfl/dataset.hpp"
#include "cfl/federation.hpp"
#include "cfl/probe.hpp"
#include "cfl/silo.hpp"

namespace cfl {

/// Train/test split plus aligned silo views. Imbalance touches the training
/// views only; test views keep every row.
struct PreparedData {
  SplitTable split;  // min-max scaled with train statistics
  std::vector<SiloView> train_views;
  std::vector<SiloView> test_views;
  std::size_t intersection_rows = 0;  // |intersection of S_i| over training views
};

PreparedData prepare_data(const Table& table, const ExperimentConfig& cfg);

struct RunSummary {
  ExperimentConfig config;
  std::vector<MetricsRow> rows;  // per silo: Base1, CFL, Base2
  double mean_f1_base1 = 0.0;
  double mean_f1_cfl = 0.0;
  double mean_f1_base2 = 0.0;
  double delta_cfl = 0.0;    // mean F1(CFL) - mean F1(Base1)
  double delta_base2 = 0.0;  // mean F1(Base2) - mean F1(Base1)
  std::vector<RoundLog> round_logs;
  PrivacyReport privacy;
  nlohmann::json manifest;
  double wall_seconds = 0.0;

  Metrics metrics(int silo, ModelTag model) const;
  Metrics mean_metrics(ModelTag model) const;
};

// Runs the whole pipeline for one setting. Errors are rethrown with the
// failing stage prefixed and keep their type.
RunSummary run_experiment(const ExperimentConfig& cfg);
RunSummary run_experiment(const Table& table, const ExperimentConfig& cfg);

std::string metrics_csv(const RunSummary& s);
std::string rounds_csv(const RunSummary& s);
nlohmann::json summary_json(const RunSummary& s);
nlohmann::json silo_manifest(const PreparedData& data);

// Writes metrics.csv, summary.json, rounds.csv and silos.json under `dir`.
void write_run_outputs(const RunSummary& s, const std::filesystem::path& dir);

struct AblationSummary {
  RunSummary with_reorder;
  RunSummary without_reorder;
};

AblationSummary run_pearson_ablation(const ExperimentConfig& cfg);
std::string ablation_csv(const AblationSummary& a);

std::string bench_csv_header();
std::string bench_csv_row(const std::string& dataset_tag, const SimilarityBench& b);

}  // namespace cfl
