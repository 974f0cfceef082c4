#include <cstdio>
#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "metarlbo/experiment.hpp"
#include "metarlbo/oracles.hpp"

namespace {

using namespace metarlbo;

int cmd_run(const std::string& config_path, const std::string& out_root) {
  const auto report = bench::run_experiment(config_path, out_root);
  int failures = 0;
  for (const auto& outcome : report.outcomes) {
    if (outcome.failed) {
      ++failures;
      std::cerr << "seed failure: " << outcome.run_dir << ": " << outcome.error
                << "\n";
    } else {
      std::cout << "seed " << outcome.master_seed << " -> " << outcome.run_dir
                << " (final cum_max "
                << outcome.records.back().cumulative_max << ")\n";
    }
  }
  std::cout << "experiment dir: " << report.experiment_dir << "\n";
  std::cout << "final median cum_max: " << report.final_median_cum_max << "\n";
  return failures == 0 ? 0 : 1;
}

int cmd_brute_force(const std::string& config_path,
                    std::uint64_t max_enumeration) {
  const auto cfg = bench::Config::from_file(config_path);
  oracles::OracleSpec spec;
  spec.kind = oracles::oracle_kind_from_string(cfg.get_string("oracle.kind"));
  spec.alphabet = seqcore::Alphabet(cfg.get_string("oracle.alphabet"));
  if (cfg.has("oracle.length")) {
    spec.min_length = spec.max_length =
        static_cast<int>(cfg.get_int("oracle.length"));
  } else {
    spec.min_length = static_cast<int>(cfg.get_int("oracle.min_length"));
    spec.max_length = static_cast<int>(cfg.get_int("oracle.max_length"));
  }
  spec.seed = cfg.get_u64_or("oracle.seed", 7);
  spec.rna_target_length =
      static_cast<int>(cfg.get_int_or("oracle.rna_target_length", 50));

  const auto result = oracles::brute_force_max(spec, max_enumeration);
  std::cout << "evaluated: " << result.evaluated << "\n";
  std::cout << "max score: " << result.max_score << "\n";
  std::cout << "argmax: "
            << seqcore::sequence_to_string(spec.alphabet, result.argmax)
            << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"metarlbo: batched discrete sequence optimization"};
  app.require_subcommand(1);

  std::string config_path, run_dir, out_root;
  int round_n = 0;
  int members = 8;
  double subsample_p = 1.0;
  std::uint64_t max_enumeration = 100000000ull;

  auto* run = app.add_subcommand("run", "run a configured campaign experiment");
  run->add_option("config", config_path, "experiment config file")->required();
  run->add_option("--out", out_root, "override the output root directory");

  auto* baseline = app.add_subcommand(
      "baseline", "run a baseline experiment (method from the config)");
  baseline->add_option("config", config_path, "experiment config file")
      ->required();
  baseline->add_option("--out", out_root, "override the output root directory");

  auto* analyze = app.add_subcommand(
      "analyze", "calibration / NLL analysis of one run directory");
  analyze->add_option("run_dir", run_dir, "campaign run directory")->required();
  analyze->add_option("--round", round_n, "train on rounds <= N, test on N+1")
      ->required();
  analyze->add_option("--members", members, "ensemble size (default 8)");
  analyze->add_option("--p", subsample_p, "per-member subsample fraction");

  auto* brute =
      app.add_subcommand("brute-force", "enumerate an oracle's exact optimum");
  brute->add_option("config", config_path, "config file with an [oracle] section")
      ->required();
  brute->add_option("--max-enum", max_enumeration,
                    "refuse larger search spaces (default 1e8)");

  auto* plot = app.add_subcommand("plot-data",
                                  "re-emit aggregate CSVs for an experiment");
  plot->add_option("run_dir", run_dir, "experiment directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed() || baseline->parsed()) {
      return cmd_run(config_path, out_root);
    }
    if (analyze->parsed()) {
      const auto analysis =
          bench::analyze_uncertainty(run_dir, round_n, members, subsample_p);
      std::cout << "wrote calibration and NLL plot data for round " << round_n
                << " under " << run_dir << "\n";
      std::cout << "conv1d calibration:";
      for (const auto& p : analysis.calibration_conv) {
        std::printf(" (%.1f: %.3f)", p.expected, p.observed);
      }
      std::cout << "\n";
      return 0;
    }
    if (brute->parsed()) return cmd_brute_force(config_path, max_enumeration);
    if (plot->parsed()) {
      bench::write_plot_data(run_dir);
      std::cout << "regenerated aggregate.csv under " << run_dir << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
