#include "doctest.h"

#include <filesystem>
#include <fstream>

#include "cfl/config.hpp"
#include "cfl/error.hpp"

using namespace cfl;

TEST_CASE("defaults follow the desk profile") {
  const ExperimentConfig c;
  CHECK(c.split_rate == 0.3);
  CHECK(c.client_drop_rate == 0.25);
  CHECK(c.data_drop_rate == 0.5);
  CHECK(c.class_drop_rate == 0.5);
  CHECK(c.noise_level == 0.1);
  CHECK(c.mask_prob == 0.2);
  CHECK(c.n_silos == 5);
  CHECK(c.features_per_silo == 21);
  CHECK(c.subsample_rows == 6000);
  CHECK(c.epochs == 10);
  CHECK(c.batch_size == 256);
  CHECK(c.encoder_size == 256);
  CHECK(c.similarity == Similarity::dot);
  CHECK(c.pearson_reorder);
}

TEST_CASE("config round trips through JSON") {
  ExperimentConfig c;
  c.dataset_path = "x.csv";
  c.setting = ImbalanceMode::mixed;
  c.temperature = 0.07;
  c.learning_rate = 3.3e-4;
  c.seed = 18446744073709551615ull;
  c.similarity = Similarity::cosine;
  c.optimizer = OptimizerKind::sgd;
  c.pearson_reorder = false;
  const auto text = to_json(c).dump();
  CHECK(config_from_json(nlohmann::json::parse(text)) == c);
  CHECK(config_from_json(to_json(ExperimentConfig{})) == ExperimentConfig{});
}

TEST_CASE("partial configs keep defaults") {
  const auto c = config_from_json(nlohmann::json::parse(R"({"seed": 7, "setting": "data_size"})"));
  CHECK(c.seed == 7);
  CHECK(c.setting == ImbalanceMode::data_size);
  CHECK(c.n_silos == 5);
}

TEST_CASE("unknown keys, wrong types and bad values are config errors") {
  using nlohmann::json;
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"epoch": 3})")), ConfigError);
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"epochs": "3"})")), ConfigError);
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"epochs": -3})")), ConfigError);
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"pearson_reorder": 1})")), ConfigError);
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"setting": "weird"})")), ConfigError);
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"similarity": "l1"})")), ConfigError);
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"split_rate": 1.0})")), ConfigError);
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"client_drop_rate": 2})")), ConfigError);
  CHECK_THROWS_AS(config_from_json(json::parse(R"({"temperature": 0})")), ConfigError);
  CHECK_THROWS_AS(config_from_json(json::parse(R"([1, 2])")), ConfigError);
  try {
    config_from_json(json::parse(R"({"lerning_rate": 0.1})"));
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("lerning_rate") != std::string::npos);
  }
}

TEST_CASE("loading from disk") {
  const auto dir = std::filesystem::temp_directory_path();
  const auto good = dir / "cfl_test_cfg.json", bad = dir / "cfl_test_bad.json";
  std::ofstream(good) << R"({"epochs": 2, "embed_size": 64})";
  std::ofstream(bad) << "{ not json";
  const auto c = load_config(good);
  CHECK(c.epochs == 2);
  CHECK(c.embed_size == 64);
  CHECK_THROWS_AS(load_config(bad), ConfigError);
  CHECK_THROWS_AS(load_config(dir / "cfl_no_such_config.json"), ConfigError);
}

TEST_CASE("derived configs carry the knobs through") {
  ExperimentConfig c;
  c.temperature = 0.2;
  c.mask_prob = 0.3;
  c.labeled_fraction = 0.5;
  c.setting = ImbalanceMode::class_size;
  const auto t = c.train_config();
  CHECK(t.loss.temperature == 0.2);
  CHECK(t.augment.mask_prob == 0.3);
  CHECK(t.hidden == c.encoder_size);
  CHECK(c.probe_config().labeled_fraction == 0.5);
  CHECK(c.imbalance().mode == ImbalanceMode::class_size);
  CHECK(imbalance_mode_from_string(to_string(ImbalanceMode::mixed)) == ImbalanceMode::mixed);
}
