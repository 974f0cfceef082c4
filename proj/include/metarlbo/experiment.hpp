#pragma once

#include <optional>
#include <string>
#include <vector>

#include "metarlbo/baselines.hpp"
#include "metarlbo/bayesopt.hpp"
#include "metarlbo/config.hpp"

namespace metarlbo::bench {

enum class Method { metarlbo, policy_ensemble, random, genetic };

Method method_from_string(const std::string& name);
std::string to_string(Method method);

// One multi-seed experiment of a single method on a single task; seeds share
// every setting except the master seed.
struct ExperimentConfig {
  Method method = Method::metarlbo;
  std::string task_label;
  int seeds = 3;
  std::uint64_t base_seed = 1;
  std::string out_root = "runs";
  bo::CampaignConfig campaign;     // metarlbo / policy_ensemble
  BaselineSpec baseline;           // random / genetic
  Config raw;                      // canonical echo for diffs and hashing
};

// Maps a parsed config onto the typed experiment; unknown enum values and
// malformed fields raise ConfigError naming the field path.
ExperimentConfig load_experiment_config(const Config& cfg);

struct SeedOutcome {
  std::uint64_t master_seed = 0;
  std::string run_dir;
  std::vector<bo::RoundRecord> records;
  bool failed = false;
  std::string error;
};

struct AggregateRow {
  int round = 0;
  int seeds = 0;
  double cum_max_min = 0.0;
  double cum_max_median = 0.0;
  double cum_max_max = 0.0;
};

struct ExperimentReport {
  ExperimentConfig config;
  std::vector<SeedOutcome> outcomes;
  std::vector<AggregateRow> aggregate;
  double final_median_cum_max = 0.0;
  std::string experiment_dir;
};

// Runs every seed (failures are recorded and the remaining seeds continue),
// writes per-seed round CSVs, the aggregate curve, and a summary table. The
// summary includes published reference rows (marked source=paper) for the
// fixed-length alternating-chain task at length 20.
ExperimentReport run_experiment(const std::string& config_path,
                                const std::string& out_root_override = "");
ExperimentReport run_experiment_config(const Config& cfg,
                                       const std::string& out_root_override =
                                           "");

// Rebuilds mlp and conv1d ensembles on the data of rounds <= round_n inside a
// run directory and evaluates calibration and per-point NLL on round n+1,
// writing one plot-data CSV per surrogate.
struct UncertaintyAnalysis {
  std::vector<surrogate::CalibrationPoint> calibration_mlp;
  std::vector<surrogate::CalibrationPoint> calibration_conv;
  std::vector<double> nll_mlp;
  std::vector<double> nll_conv;
};
UncertaintyAnalysis analyze_uncertainty(const std::string& run_dir,
                                        int round_n, int ensemble_size = 8,
                                        double subsample_p = 1.0);

// Recomputes the aggregate curve CSV from the per-seed round CSVs of an
// experiment directory.
void write_plot_data(const std::string& experiment_dir);

std::vector<AggregateRow> aggregate_records(
    const std::vector<SeedOutcome>& outcomes);

}  // namespace metarlbo::bench
