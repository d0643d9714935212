// Command-line front end for the contrastive federated learning pipeline.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "cfl/config.hpp"
#include "cfl/error.hpp"
#include "cfl/experiment.hpp"
#include "cfl/gradcheck.hpp"
#include "cfl/loss.hpp"
#include "cfl/silo.hpp"

#ifndef CFL_DEFAULT_DATASET
#define CFL_DEFAULT_DATASET ""
#endif

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitDivergence = 4;

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = "out";
};

cfl::ExperimentConfig resolve_config(const Options& o) {
  cfl::ExperimentConfig cfg;
  if (!o.config_path.empty()) {
    cfg = cfl::load_config(o.config_path);
    // Relative dataset paths are taken from the config file's directory.
    if (!cfg.dataset_path.empty() && fs::path(cfg.dataset_path).is_relative())
      cfg.dataset_path = (fs::path(o.config_path).parent_path() / cfg.dataset_path).lexically_normal().string();
  }
  if (cfg.dataset_path.empty()) cfg.dataset_path = CFL_DEFAULT_DATASET;
  if (o.seed) cfg.seed = *o.seed;
  cfg.validate();
  return cfg;
}

void write_text(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path().empty() ? fs::path(".") : p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw cfl::Error("cannot write " + p.string());
  out << text;
}

int cmd_experiment(const Options& o) {
  const auto cfg = resolve_config(o);
  try {
    const auto s = cfl::run_experiment(cfg);
    cfl::write_run_outputs(s, o.out_dir);
    std::printf("%s %s: mean F1 Base1 %.4f  CFL %.4f  Base2 %.4f  (%.1f s)\n", cfg.dataset_name.c_str(),
                cfl::to_string(cfg.setting).c_str(), s.mean_f1_base1, s.mean_f1_cfl, s.mean_f1_base2,
                s.wall_seconds);
    std::printf("privacy audit: %s\n", s.privacy.passed ? "pass" : "FAIL");
    return s.privacy.passed ? kExitOk : kExitFailure;
  } catch (const cfl::Error&) {
    std::cerr << "config: " << cfl::to_json(cfg).dump() << "\n";
    throw;
  }
}

int cmd_ablate(const Options& o) {
  const auto cfg = resolve_config(o);
  try {
    const auto a = cfl::run_pearson_ablation(cfg);
    const fs::path dir(o.out_dir);
    cfl::write_run_outputs(a.with_reorder, dir / "pearson");
    cfl::write_run_outputs(a.without_reorder, dir / "no_pearson");
    const std::string csv = cfl::ablation_csv(a);
    write_text(dir / "ablation.csv", csv);
    std::cout << csv;
    return kExitOk;
  } catch (const cfl::Error&) {
    std::cerr << "config: " << cfl::to_json(cfg).dump() << "\n";
    throw;
  }
}

int cmd_bench(const Options& o) {
  const auto cfg = resolve_config(o);
  const auto b = cfl::bench_similarity(cfg.embed_size, cfg.batch_size, cfg.bench_iterations, cfg.seed);
  const std::string csv = cfl::bench_csv_header() + cfl::bench_csv_row(cfg.dataset_name, b);
  write_text(fs::path(o.out_dir) / "bench_loss.csv", csv);
  std::cout << csv;
  return kExitOk;
}

int cmd_gradcheck(const Options& o) {
  cfl::GradcheckOptions opt;
  if (o.seed) opt.seed = *o.seed;
  const auto r = cfl::run_gradcheck(opt);
  for (const auto& c : r.cases)
    std::printf("%-20s checked %5zu  kinks %3zu  max rel err %.3e  %s\n", c.name.c_str(), c.checked,
                c.skipped_kinks, c.max_rel_error, c.passed ? "pass" : "FAIL");
  std::printf("max relative error %.3e (threshold %.0e): %s\n", r.max_rel_error, opt.threshold,
              r.passed ? "pass" : "FAIL");
  return r.passed ? kExitOk : kExitFailure;
}

int cmd_covdev(const Options& o) {
  const std::uint64_t seed0 = o.seed.value_or(42);
  const std::vector<std::size_t> counts = {1, 5, 10, 25, 50};
  const std::size_t seeds = 20;
  cfl::CovDevConfig cfg;
  std::string csv = "seed,silos,deviation,bound\n";
  std::vector<double> mean(counts.size(), 0.0);
  for (std::size_t s = 0; s < seeds; ++s) {
    cfl::RngStream rng(seed0 + s, {0, 0, cfl::StreamPurpose::covdev});
    const auto pts = cfl::covariance_deviation_experiment(counts, cfg, rng);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      char line[160];
      std::snprintf(line, sizeof line, "%llu,%zu,%.9g,%.9g\n", static_cast<unsigned long long>(seed0 + s),
                    pts[i].silos, pts[i].deviation, pts[i].bound);
      csv += line;
      mean[i] += pts[i].deviation / static_cast<double>(seeds);
    }
  }
  write_text(fs::path(o.out_dir) / "covdev.csv", csv);
  std::printf("silos  mean deviation over %zu seeds\n", seeds);
  for (std::size_t i = 0; i < counts.size(); ++i) std::printf("%5zu  %.6f\n", counts[i], mean[i]);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Contrastive federated learning over vertically partitioned data silos"};
  app.require_subcommand(1);
  Options o;
  std::uint64_t seed = 0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config_path, "JSON experiment config")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "Seed override");
    sub->add_option("--out", o.out_dir, "Output directory");
  };
  struct Cmd {
    const char* name;
    const char* help;
    int (*fn)(const Options&);
  };
  const Cmd cmds[] = {
      {"experiment", "Run prep, federated pretraining and probes for one setting", cmd_experiment},
      {"ablate-pearson", "Run the experiment with and without Pearson reordering", cmd_ablate},
      {"bench-loss", "Time dot and cosine contrastive loss", cmd_bench},
      {"gradcheck", "Finite-difference check of every loss gradient", cmd_gradcheck},
      {"covdev", "Monte Carlo covariance deviation under zero-fill", cmd_covdev},
  };
  std::vector<CLI::App*> subs;
  for (const auto& c : cmds) {
    subs.push_back(app.add_subcommand(c.name, c.help));
    add_common(subs.back());
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  for (std::size_t i = 0; i < subs.size(); ++i) {
    if (!subs[i]->parsed()) continue;
    if (subs[i]->count("--seed") > 0) o.seed = seed;
    try {
      return cmds[i].fn(o);
    } catch (const cfl::ConfigError& e) {
      std::cerr << "config error: " << e.what() << "\n";
      return kExitConfig;
    } catch (const cfl::DataError& e) {
      std::cerr << "data error: " << e.what() << "\n";
      return kExitData;
    } catch (const cfl::CorruptionError& e) {
      std::cerr << "data error: " << e.what() << "\n";
      return kExitData;
    } catch (const cfl::DivergenceError& e) {
      std::cerr << "divergence: " << e.what() << "\n";
      return kExitDivergence;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return kExitFailure;
    }
  }
  return kExitFailure;
}
