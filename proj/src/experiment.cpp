#include "cfl/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>

#include "cfl/error.hpp"

namespace cfl {

namespace {

// Rethrows with "[stage] " prefixed while keeping the exception type, so the
// CLI can still map it to an exit code.
template <typename F>
auto stage(const char* name, F&& f) -> decltype(f()) {
  const std::string prefix = std::string("[") + name + "] ";
  try {
    return f();
  } catch (const ConfigError& e) {
    throw ConfigError(prefix + e.what());
  } catch (const DataError& e) {
    throw DataError(prefix + e.what());
  } catch (const DivergenceError& e) {
    throw DivergenceError(prefix + e.what());
  } catch (const CorruptionError& e) {
    throw CorruptionError(prefix + e.what());
  } catch (const DegenerateError& e) {
    throw DegenerateError(prefix + e.what());
  } catch (const ShapeError& e) {
    throw ShapeError(prefix + e.what());
  } catch (const Error& e) {
    throw Error(prefix + e.what());
  }
}

std::string fmt6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string fmt_g(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("cannot write " + p.string());
  out << text;
}

}  // namespace

PreparedData prepare_data(const Table& table, const ExperimentConfig& cfg) {
  cfg.validate();
  PreparedData out;
  Table source = table;
  if (cfg.subsample_rows > 0 && cfg.subsample_rows < table.rows()) {
    RngStream rng(cfg.seed, {0, 0, StreamPurpose::subsample});
    source = subsample(table, cfg.subsample_rows, rng);
  }
  RngStream split_rng(cfg.seed, {0, 0, StreamPurpose::split});
  out.split = train_test_split(source, cfg.split_rate, split_rng);
  const auto scaler = MinMaxScaler::fit(out.split.train.features);
  out.split.train.features = scaler.apply(out.split.train.features);
  out.split.test.features = scaler.apply(out.split.test.features);

  out.train_views = vertical_partition(out.split.train, cfg.n_silos, cfg.features_per_silo);
  out.test_views = vertical_partition(out.split.test, cfg.n_silos, cfg.features_per_silo);
  if (cfg.pearson_reorder) {
    for (std::size_t i = 0; i < out.train_views.size(); ++i) {
      out.train_views[i] = pearson_reorder(out.train_views[i]);
      // Same permutation for test encoding; it was computed on training rows.
      out.test_views[i] = apply_column_order(out.test_views[i], out.train_views[i].column_order);
    }
  }
  out.train_views = apply_imbalance(std::move(out.train_views), cfg.imbalance(),
                                    RngStream(cfg.seed, {0, 0, StreamPurpose::misc}));
  for (const auto& v : out.train_views) zero_fill_check(v);

  const std::size_t m = out.split.train.rows();
  for (std::size_t r = 0; r < m; ++r) {
    bool everywhere = true;
    for (const auto& v : out.train_views) everywhere = everywhere && v.present[r];
    if (everywhere) ++out.intersection_rows;
  }
  return out;
}

nlohmann::json silo_manifest(const PreparedData& data) {
  nlohmann::json silos = nlohmann::json::array();
  for (const auto& v : data.train_views) {
    const auto fill = zero_fill_check(v);
    nlohmann::json columns = nlohmann::json::array();
    for (std::size_t j = 0; j < v.width(); ++j) columns.push_back(v.feature_names[j]);
    silos.push_back({{"silo_id", v.silo_id},
                     {"d_i", v.width()},
                     {"rows", v.rows()},
                     {"present_rows", v.present_count()},
                     {"zero_filled_rows", fill.filled_rows},
                     {"retained_classes", v.retained_classes},
                     {"column_order", v.column_order},
                     {"columns", columns}});
  }
  return {{"train_rows", data.split.train.rows()},
          {"test_rows", data.split.test.rows()},
          {"intersection_rows", data.intersection_rows},
          {"silos", silos}};
}

Metrics RunSummary::metrics(int silo, ModelTag model) const {
  for (const auto& r : rows)
    if (r.silo == silo && r.model == model) return r.metrics;
  throw Error("no metrics for silo " + std::to_string(silo) + " model " + to_string(model));
}

Metrics RunSummary::mean_metrics(ModelTag model) const {
  Metrics m;
  std::size_t n = 0;
  for (const auto& r : rows) {
    if (r.model != model) continue;
    m.precision += r.metrics.precision;
    m.recall += r.metrics.recall;
    m.f1 += r.metrics.f1;
    ++n;
  }
  if (n > 0) {
    m.precision /= static_cast<double>(n);
    m.recall /= static_cast<double>(n);
    m.f1 /= static_cast<double>(n);
  }
  return m;
}

RunSummary run_experiment(const Table& table, const ExperimentConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  RunSummary s;
  s.config = cfg;
  const PreparedData data = stage("silo-prep", [&] { return prepare_data(table, cfg); });
  s.manifest = silo_manifest(data);
  const TrainConfig train = cfg.train_config();
  const CflResult cfl = stage("pretrain", [&] { return run_cfl(data.train_views, train); });
  s.round_logs = cfl.logs;

  stage("privacy", [&] {
    s.privacy = privacy_audit(cfl.exchanges, cfl.parameter_count);
    const auto doubled = audit_row_invariance(data.train_views, train);
    s.privacy.messages_checked += doubled.messages_checked;
    s.privacy.failures.insert(s.privacy.failures.end(), doubled.failures.begin(), doubled.failures.end());
    s.privacy.passed = s.privacy.failures.empty();
  });

  stage("probe", [&] {
    const ProbeConfig probe = cfg.probe_config();
    const RngStream probe_rng(cfg.seed, {0, 0, StreamPurpose::label_subset});
    const auto base = evaluate_baselines(data.split, data.train_views, data.test_views, probe, probe_rng);
    for (std::size_t i = 0; i < data.train_views.size(); ++i) {
      const int silo = data.train_views[i].silo_id;
      const Metrics cfl_m = evaluate_silo(cfl.encoder, data.train_views[i], data.test_views[i], probe, probe_rng);
      s.rows.push_back({silo, ModelTag::base1, base.base1});
      s.rows.push_back({silo, ModelTag::cfl, cfl_m});
      s.rows.push_back({silo, ModelTag::base2, base.base2[i]});
    }
  });
  s.mean_f1_base1 = s.mean_metrics(ModelTag::base1).f1;
  s.mean_f1_cfl = s.mean_metrics(ModelTag::cfl).f1;
  s.mean_f1_base2 = s.mean_metrics(ModelTag::base2).f1;
  s.delta_cfl = s.mean_f1_cfl - s.mean_f1_base1;
  s.delta_base2 = s.mean_f1_base2 - s.mean_f1_base1;
  s.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return s;
}

RunSummary run_experiment(const ExperimentConfig& cfg) {
  const Table table = stage("load", [&] {
    if (cfg.dataset_path.empty()) throw ConfigError("dataset_path is not set");
    Table t = load_csv(cfg.dataset_path, cfg.label_column);
    t.name = cfg.dataset_name;
    return t;
  });
  return run_experiment(table, cfg);
}

std::string metrics_csv(const RunSummary& s) {
  std::string out = "dataset,setting,silo,model,precision,recall,f1\n";
  for (const auto& r : s.rows) {
    out += s.config.dataset_name + "," + to_string(s.config.setting) + "," + std::to_string(r.silo) + "," +
           to_string(r.model) + "," + fmt6(r.metrics.precision) + "," + fmt6(r.metrics.recall) + "," +
           fmt6(r.metrics.f1) + "\n";
  }
  return out;
}

std::string rounds_csv(const RunSummary& s) {
  std::string out = "round,silo,l_total,l_r,l_c,l_d,seconds\n";
  for (const auto& log : s.round_logs)
    for (const auto& e : log.entries)
      out += std::to_string(e.round) + "," + std::to_string(e.silo_id) + "," + fmt_g(e.total) + "," +
             fmt_g(e.recon) + "," + fmt_g(e.contrastive) + "," + fmt_g(e.distance) + "," + fmt_g(e.seconds) + "\n";
  return out;
}

nlohmann::json summary_json(const RunSummary& s) {
  nlohmann::json per_silo = nlohmann::json::array();
  for (const auto& r : s.rows)
    per_silo.push_back({{"silo", r.silo},
                        {"model", to_string(r.model)},
                        {"precision", r.metrics.precision},
                        {"recall", r.metrics.recall},
                        {"f1", r.metrics.f1}});
  return {{"config", to_json(s.config)},
          {"metrics", per_silo},
          {"mean_f1", {{"Base1", s.mean_f1_base1}, {"CFL", s.mean_f1_cfl}, {"Base2", s.mean_f1_base2}}},
          {"delta_f1", {{"CFL-Base1", s.delta_cfl}, {"Base2-Base1", s.delta_base2}}},
          {"privacy",
           {{"passed", s.privacy.passed},
            {"expected_count", s.privacy.expected_count},
            {"messages_checked", s.privacy.messages_checked},
            {"failures", s.privacy.failures}}},
          {"wall_seconds", s.wall_seconds},
          {"files", {{"metrics", "metrics.csv"}, {"rounds", "rounds.csv"}, {"manifest", "silos.json"}}}};
}

void write_run_outputs(const RunSummary& s, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_file(dir / "metrics.csv", metrics_csv(s));
  write_file(dir / "rounds.csv", rounds_csv(s));
  write_file(dir / "summary.json", summary_json(s).dump(2) + "\n");
  write_file(dir / "silos.json", s.manifest.dump(2) + "\n");
}

AblationSummary run_pearson_ablation(const ExperimentConfig& cfg) {
  const Table table = stage("load", [&] {
    if (cfg.dataset_path.empty()) throw ConfigError("dataset_path is not set");
    Table t = load_csv(cfg.dataset_path, cfg.label_column);
    t.name = cfg.dataset_name;
    return t;
  });
  ExperimentConfig on = cfg, off = cfg;
  on.pearson_reorder = true;
  off.pearson_reorder = false;
  return {run_experiment(table, on), run_experiment(table, off)};
}

std::string ablation_csv(const AblationSummary& a) {
  std::string out = "dataset,variant,seed,model,precision,recall,f1\n";
  for (const auto* s : {&a.with_reorder, &a.without_reorder}) {
    const std::string variant = s->config.pearson_reorder ? "pearson" : "no_pearson";
    for (ModelTag t : {ModelTag::base1, ModelTag::cfl, ModelTag::base2}) {
      const Metrics m = s->mean_metrics(t);
      out += s->config.dataset_name + "," + variant + "," + std::to_string(s->config.seed) + "," + to_string(t) +
             "," + fmt6(m.precision) + "," + fmt6(m.recall) + "," + fmt6(m.f1) + "\n";
    }
  }
  return out;
}

std::string bench_csv_header() { return "dataset,embed_dim,K,t_dot_s,t_cos_s,ratio\n"; }

std::string bench_csv_row(const std::string& dataset_tag, const SimilarityBench& b) {
  return dataset_tag + "," + std::to_string(b.embed_dim) + "," + std::to_string(b.batch) + "," +
         fmt_g(b.seconds_dot) + "," + fmt_g(b.seconds_cosine) + "," + fmt_g(b.ratio) + "\n";
}

}  // namespace cfl
