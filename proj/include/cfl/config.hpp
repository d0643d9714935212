#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "json.hpp"

#include "cfl/federation.hpp"
#include "cfl/loss.hpp"
#include "cfl/probe.hpp"
#include "cfl/silo.hpp"

namespace cfl {

/// Every knob of an experiment run. Defaults are the desk-scale Adult profile.
struct ExperimentConfig {
  std::string dataset_path;
  std::string label_column = "income";
  std::string dataset_name = "income";
  std::size_t subsample_rows = 6000;  // 0 keeps every row
  ImbalanceMode setting = ImbalanceMode::standard;
  std::size_t n_silos = 5;
  std::size_t features_per_silo = 21;
  std::size_t encoder_size = 256;
  std::size_t embed_size = 256;
  std::size_t epochs = 10;
  std::size_t local_epochs_per_round = 1;
  std::size_t batch_size = 256;
  double temperature = 0.1;
  double learning_rate = 1e-3;
  OptimizerKind optimizer = OptimizerKind::adam;
  double noise_level = 0.1;
  double mask_prob = 0.2;
  bool swap_noise = false;
  double client_drop_rate = 0.25;
  double data_drop_rate = 0.5;
  double class_drop_rate = 0.5;
  double labeled_fraction = 1.0;
  double split_rate = 0.3;
  std::uint64_t seed = 42;
  bool pearson_reorder = true;
  Similarity similarity = Similarity::dot;
  bool parallel_clients = true;
  bool weight_by_samples = false;
  double probe_l2 = 1e-4;
  std::size_t probe_max_iterations = 500;
  double probe_tolerance = 1e-6;
  std::size_t bench_iterations = 200;

  void validate() const;
  TrainConfig train_config() const;
  ProbeConfig probe_config() const;
  ImbalanceSpec imbalance() const;

  bool operator==(const ExperimentConfig&) const = default;
};

nlohmann::json to_json(const ExperimentConfig& cfg);
// Unknown keys and wrongly typed values raise ConfigError.
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);

std::string to_string(ImbalanceMode m);
ImbalanceMode imbalance_mode_from_string(const std::string& s);

}  // namespace cfl
