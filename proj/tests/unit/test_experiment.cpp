#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cfl/error.hpp"
#include "cfl/experiment.hpp"

using namespace cfl;
namespace fs = std::filesystem;

namespace {

Table blobs() {
  RngStream rng(21, {0, 0, StreamPurpose::synth});
  Table t = synth_table(400, 12, 2, rng, 1.5);
  // Extra correlated columns so Pearson ordering has something to find.
  for (std::size_t r = 0; r < t.rows(); ++r) {
    t.features(r, 5) = 0.5 * t.features(r, 0) + 0.1 * t.features(r, 5);
    t.features(r, 10) = -t.features(r, 1) + 0.2 * t.features(r, 10);
  }
  t.name = "blobs";
  return t;
}

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.dataset_name = "blobs";
  c.subsample_rows = 0;
  c.n_silos = 4;
  c.features_per_silo = 3;
  c.encoder_size = 16;
  c.embed_size = 16;
  c.epochs = 2;
  c.batch_size = 32;
  c.split_rate = 0.5;
  c.seed = 5;
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("experiment writes every output and reports consistent means") {
  const auto s = run_experiment(blobs(), small_config());
  CHECK(s.rows.size() == 12);
  double sum = 0;
  for (int silo = 1; silo <= 4; ++silo) sum += s.metrics(silo, ModelTag::cfl).f1;
  CHECK(s.mean_f1_cfl == doctest::Approx(sum / 4).epsilon(1e-15));
  CHECK(s.delta_cfl == s.mean_f1_cfl - s.mean_f1_base1);
  CHECK(s.delta_base2 == s.mean_f1_base2 - s.mean_f1_base1);
  CHECK(s.privacy.passed);
  CHECK(s.round_logs.size() == 2);

  const fs::path dir = fs::temp_directory_path() / "cfl_test_experiment";
  fs::remove_all(dir);
  write_run_outputs(s, dir);
  for (const char* f : {"metrics.csv", "summary.json", "rounds.csv", "silos.json"}) {
    INFO(f);
    CHECK(fs::file_size(dir / f) > 0);
  }
  const std::string csv = slurp(dir / "metrics.csv");
  CHECK(csv.rfind("dataset,setting,silo,model,precision,recall,f1\n", 0) == 0);
  CHECK(csv.find("blobs,standard,3,Base2,") != std::string::npos);
  CHECK(slurp(dir / "rounds.csv").rfind("round,silo,l_total,l_r,l_c,l_d,seconds\n", 0) == 0);

  const auto summary = nlohmann::json::parse(slurp(dir / "summary.json"));
  CHECK(config_from_json(summary.at("config")) == s.config);
  CHECK(summary.at("mean_f1").at("CFL").get<double>() == s.mean_f1_cfl);
}

TEST_CASE("metrics are byte-identical across runs and schedules") {
  auto cfg = small_config();
  cfg.parallel_clients = true;
  const auto a = metrics_csv(run_experiment(blobs(), cfg));
  const auto b = metrics_csv(run_experiment(blobs(), cfg));
  cfg.parallel_clients = false;
  const auto c = metrics_csv(run_experiment(blobs(), cfg));
  CHECK(a == b);
  CHECK(a == c);
}

TEST_CASE("data-size setting drops half of one silo out of four") {
  auto cfg = small_config();
  cfg.setting = ImbalanceMode::data_size;
  const auto data = prepare_data(blobs(), cfg);
  const auto manifest = silo_manifest(data);
  const std::size_t train = manifest.at("train_rows");
  std::size_t reduced = 0;
  for (const auto& s : manifest.at("silos")) {
    const std::size_t present = s.at("present_rows");
    if (present < train) {
      ++reduced;
      CHECK(present == train / 2);
    }
  }
  CHECK(reduced == 1);
  CHECK(data.intersection_rows == train / 2);
  // Test rows are never dropped.
  for (const auto& v : data.test_views) CHECK(v.present_count() == v.rows());
}

TEST_CASE("mixed setting applies both generators") {
  auto cfg = small_config();
  cfg.setting = ImbalanceMode::mixed;
  const auto data = prepare_data(blobs(), cfg);
  CHECK(data.train_views[0].retained_classes.size() == 1);
  CHECK(data.train_views[0].present_count() < data.split.train.rows() / 2);
  CHECK(data.train_views[1].present_count() == data.split.train.rows());
  const auto s = run_experiment(blobs(), cfg);
  CHECK(s.privacy.passed);
}

TEST_CASE("test columns follow the training permutation") {
  const auto data = prepare_data(blobs(), small_config());
  for (std::size_t i = 0; i < data.train_views.size(); ++i) {
    CHECK(data.train_views[i].column_order == data.test_views[i].column_order);
    CHECK(data.train_views[i].feature_names == data.test_views[i].feature_names);
  }
  // Normalisation used training statistics only.
  for (double v : data.split.train.features.data()) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("a single silo holding every feature") {
  auto cfg = small_config();
  cfg.n_silos = 1;
  cfg.features_per_silo = 12;
  const auto s = run_experiment(blobs(), cfg);
  CHECK(std::abs(s.delta_cfl) <= 1.0);
  CHECK(s.metrics(1, ModelTag::base2).f1 == doctest::Approx(s.mean_f1_base1).epsilon(0.01));
}

TEST_CASE("stage errors keep their type and name the stage") {
  auto cfg = small_config();
  cfg.features_per_silo = 5;  // 4 * 5 > 12 columns
  try {
    run_experiment(blobs(), cfg);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("[silo-prep]") != std::string::npos);
  }
  cfg = small_config();
  cfg.dataset_path = "/nonexistent/data.csv";
  CHECK_THROWS_AS(run_experiment(cfg), DataError);
  cfg.learning_rate = 1e300;
  cfg.optimizer = OptimizerKind::sgd;
  CHECK_THROWS_AS(run_experiment(blobs(), cfg), DivergenceError);
}

TEST_CASE("Pearson ablation pairs two runs on the same seed") {
  const fs::path csv = fs::temp_directory_path() / "cfl_test_blobs.csv";
  {
    const Table t = blobs();
    std::ofstream out(csv);
    for (const auto& n : t.feature_names) out << n << ",";
    out << "label\n";
    for (std::size_t r = 0; r < t.rows(); ++r) {
      for (std::size_t c = 0; c < t.num_features(); ++c) out << t.features(r, c) << ",";
      out << t.class_names[t.labels[r]] << "\n";
    }
  }
  auto cfg = small_config();
  cfg.dataset_path = csv.string();
  cfg.label_column = "label";
  const auto a = run_pearson_ablation(cfg);
  CHECK(a.with_reorder.config.seed == a.without_reorder.config.seed);
  CHECK(a.with_reorder.config.pearson_reorder);
  CHECK_FALSE(a.without_reorder.config.pearson_reorder);
  CHECK(a.with_reorder.manifest.at("silos") != a.without_reorder.manifest.at("silos"));
  const std::string out = ablation_csv(a);
  CHECK(out.find("blobs,pearson,5,CFL,") != std::string::npos);
  CHECK(out.find("blobs,no_pearson,5,CFL,") != std::string::npos);
}

TEST_CASE("bench rows report the exact ratio") {
  SimilarityBench b;
  b.embed_dim = 256;
  b.batch = 256;
  b.seconds_dot = 0.002;
  b.seconds_cosine = 0.003;
  b.ratio = b.seconds_cosine / b.seconds_dot;
  CHECK(bench_csv_header() == "dataset,embed_dim,K,t_dot_s,t_cos_s,ratio\n");
  CHECK(bench_csv_row("income", b) == "income,256,256,0.002,0.003,1.5\n");
}
