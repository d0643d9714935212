#include "cfl/config.hpp"

#include <fstream>
#include <functional>
#include <map>

#include "cfl/error.hpp"

namespace cfl {

std::string to_string(ImbalanceMode m) {
  switch (m) {
    case ImbalanceMode::standard:
      return "standard";
    case ImbalanceMode::data_size:
      return "data_size";
    case ImbalanceMode::class_size:
      return "class_size";
    case ImbalanceMode::mixed:
      return "mixed";
  }
  return "?";
}

ImbalanceMode imbalance_mode_from_string(const std::string& s) {
  if (s == "standard") return ImbalanceMode::standard;
  if (s == "data_size") return ImbalanceMode::data_size;
  if (s == "class_size") return ImbalanceMode::class_size;
  if (s == "mixed") return ImbalanceMode::mixed;
  throw ConfigError("unknown setting '" + s + "' (expected standard, data_size, class_size or mixed)");
}

namespace {

std::string optimizer_name(OptimizerKind k) { return k == OptimizerKind::adam ? "adam" : "sgd"; }

OptimizerKind optimizer_from_string(const std::string& s) {
  if (s == "adam") return OptimizerKind::adam;
  if (s == "sgd") return OptimizerKind::sgd;
  throw ConfigError("unknown optimizer '" + s + "' (expected adam or sgd)");
}

// One entry per key: how to read it into a config.
using Reader = std::function<void(ExperimentConfig&, const nlohmann::json&)>;

template <typename T>
Reader field(T ExperimentConfig::*member) {
  return [member](ExperimentConfig& c, const nlohmann::json& v) {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError("expected a boolean");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_unsigned()) throw ConfigError("expected a non-negative integer");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ConfigError("expected a number");
    } else {
      if (!v.is_string()) throw ConfigError("expected a string");
    }
    c.*member = v.get<T>();
  };
}

const std::map<std::string, Reader>& readers() {
  static const std::map<std::string, Reader> table = {
      {"dataset_path", field(&ExperimentConfig::dataset_path)},
      {"label_column", field(&ExperimentConfig::label_column)},
      {"dataset_name", field(&ExperimentConfig::dataset_name)},
      {"subsample_rows", field(&ExperimentConfig::subsample_rows)},
      {"setting",
       [](ExperimentConfig& c, const nlohmann::json& v) {
         if (!v.is_string()) throw ConfigError("expected a string");
         c.setting = imbalance_mode_from_string(v.get<std::string>());
       }},
      {"n_silos", field(&ExperimentConfig::n_silos)},
      {"features_per_silo", field(&ExperimentConfig::features_per_silo)},
      {"encoder_size", field(&ExperimentConfig::encoder_size)},
      {"embed_size", field(&ExperimentConfig::embed_size)},
      {"epochs", field(&ExperimentConfig::epochs)},
      {"local_epochs_per_round", field(&ExperimentConfig::local_epochs_per_round)},
      {"batch_size", field(&ExperimentConfig::batch_size)},
      {"temperature", field(&ExperimentConfig::temperature)},
      {"learning_rate", field(&ExperimentConfig::learning_rate)},
      {"optimizer",
       [](ExperimentConfig& c, const nlohmann::json& v) {
         if (!v.is_string()) throw ConfigError("expected a string");
         c.optimizer = optimizer_from_string(v.get<std::string>());
       }},
      {"noise_level", field(&ExperimentConfig::noise_level)},
      {"mask_prob", field(&ExperimentConfig::mask_prob)},
      {"swap_noise", field(&ExperimentConfig::swap_noise)},
      {"client_drop_rate", field(&ExperimentConfig::client_drop_rate)},
      {"data_drop_rate", field(&ExperimentConfig::data_drop_rate)},
      {"class_drop_rate", field(&ExperimentConfig::class_drop_rate)},
      {"labeled_fraction", field(&ExperimentConfig::labeled_fraction)},
      {"split_rate", field(&ExperimentConfig::split_rate)},
      {"seed", field(&ExperimentConfig::seed)},
      {"pearson_reorder", field(&ExperimentConfig::pearson_reorder)},
      {"similarity",
       [](ExperimentConfig& c, const nlohmann::json& v) {
         if (!v.is_string()) throw ConfigError("expected a string");
         c.similarity = similarity_from_string(v.get<std::string>());
       }},
      {"parallel_clients", field(&ExperimentConfig::parallel_clients)},
      {"weight_by_samples", field(&ExperimentConfig::weight_by_samples)},
      {"probe_l2", field(&ExperimentConfig::probe_l2)},
      {"probe_max_iterations", field(&ExperimentConfig::probe_max_iterations)},
      {"probe_tolerance", field(&ExperimentConfig::probe_tolerance)},
      {"bench_iterations", field(&ExperimentConfig::bench_iterations)},
  };
  return table;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (n_silos == 0 || features_per_silo == 0) throw ConfigError("n_silos and features_per_silo must be >= 1");
  if (!(split_rate > 0.0 && split_rate < 1.0)) throw ConfigError("split_rate must lie in (0, 1)");
  imbalance().validate();
  train_config().validate();
  probe_config().validate();
}

TrainConfig ExperimentConfig::train_config() const {
  TrainConfig t;
  t.hidden = encoder_size;
  t.embed = embed_size;
  t.epochs = epochs;
  t.local_epochs_per_round = local_epochs_per_round;
  t.batch_size = batch_size;
  t.learning_rate = learning_rate;
  t.optimizer = optimizer;
  t.augment = AugmentConfig{noise_level, mask_prob, true, swap_noise};
  t.loss.temperature = temperature;
  t.loss.similarity = similarity;
  t.weight_by_samples = weight_by_samples;
  t.parallel_clients = parallel_clients;
  t.seed = seed;
  return t;
}

ProbeConfig ExperimentConfig::probe_config() const {
  return ProbeConfig{probe_l2, probe_max_iterations, probe_tolerance, labeled_fraction};
}

ImbalanceSpec ExperimentConfig::imbalance() const {
  return ImbalanceSpec{client_drop_rate, data_drop_rate, class_drop_rate, setting};
}

nlohmann::json to_json(const ExperimentConfig& c) {
  return {
      {"dataset_path", c.dataset_path},
      {"label_column", c.label_column},
      {"dataset_name", c.dataset_name},
      {"subsample_rows", c.subsample_rows},
      {"setting", to_string(c.setting)},
      {"n_silos", c.n_silos},
      {"features_per_silo", c.features_per_silo},
      {"encoder_size", c.encoder_size},
      {"embed_size", c.embed_size},
      {"epochs", c.epochs},
      {"local_epochs_per_round", c.local_epochs_per_round},
      {"batch_size", c.batch_size},
      {"temperature", c.temperature},
      {"learning_rate", c.learning_rate},
      {"optimizer", optimizer_name(c.optimizer)},
      {"noise_level", c.noise_level},
      {"mask_prob", c.mask_prob},
      {"swap_noise", c.swap_noise},
      {"client_drop_rate", c.client_drop_rate},
      {"data_drop_rate", c.data_drop_rate},
      {"class_drop_rate", c.class_drop_rate},
      {"labeled_fraction", c.labeled_fraction},
      {"split_rate", c.split_rate},
      {"seed", c.seed},
      {"pearson_reorder", c.pearson_reorder},
      {"similarity", to_string(c.similarity)},
      {"parallel_clients", c.parallel_clients},
      {"weight_by_samples", c.weight_by_samples},
      {"probe_l2", c.probe_l2},
      {"probe_max_iterations", c.probe_max_iterations},
      {"probe_tolerance", c.probe_tolerance},
      {"bench_iterations", c.bench_iterations},
  };
}

ExperimentConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  ExperimentConfig c;
  const auto& table = readers();
  for (const auto& [key, value] : j.items()) {
    const auto it = table.find(key);
    if (it == table.end()) throw ConfigError("unknown config key '" + key + "'");
    try {
      it->second(c, value);
    } catch (const ConfigError& e) {
      throw ConfigError("config key '" + key + "': " + e.what());
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("config key '" + key + "': " + e.what());
    }
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

}  // namespace cfl
