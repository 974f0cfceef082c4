#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "metarlbo/dataset.hpp"
#include "metarlbo/metarl.hpp"
#include "metarlbo/oracles.hpp"
#include "metarlbo/surrogate.hpp"

namespace metarlbo::bo {

using seqcore::Dataset;
using seqcore::ScoredSequence;
using seqcore::Sequence;
using oracles::QueryLedger;

enum class AcquisitionKind { ucb, posterior_mean };

AcquisitionKind acquisition_kind_from_string(const std::string& name);
std::string to_string(AcquisitionKind kind);

struct AcquisitionSpec {
  AcquisitionKind kind = AcquisitionKind::ucb;
  double beta = 1.0;

  void validate() const;
};

// ucb: mu + beta * sigma; posterior_mean: mu (identically ucb at beta = 0).
double acquire(const AcquisitionSpec& spec,
               const surrogate::ProxyEnsemble& ensemble, const Sequence& s);

// Top-B candidates by acquisition value, descending, ties broken toward the
// lexicographically smaller token string. Returns the whole pool when it
// holds fewer than B candidates. The pool must already be deduplicated and
// disjoint from queried data.
std::vector<Sequence> select_batch(const std::vector<Sequence>& pool,
                                   const surrogate::ProxyEnsemble& ensemble,
                                   const AcquisitionSpec& spec, int batch_size);

struct CampaignConfig {
  int rounds = 1;              // selection rounds after the initial batch
  int batch_size = 1;          // B
  int initial_batch_size = 0;  // 0 means batch_size
  AcquisitionSpec acquisition;
  metarl::MetaConfig meta;
  metarl::GenPhaseConfig gen;
  metarl::TaskSamplerConfig tasks;
  oracles::OracleSpec oracle;
  std::uint64_t master_seed = 0;

  bool warm_start_meta = true;  // keep theta0 across rounds
  int meta_iters_warm = -1;     // meta iterations for rounds >= 2; -1 = same
  // Pad underfull selected batches with fresh random unqueried sequences so
  // the per-round query budget is met exactly.
  bool top_up_underfull = true;
  // Train a fresh ensemble on the queried data for selection instead of
  // re-using the generation proxies.
  bool fresh_selection_ensemble = false;
  // Write the wall_time CSV column as 0 so equal-seed runs are byte-identical.
  bool deterministic_output = false;

  std::string out_dir;       // empty: no file output
  int checkpoint_every = 1;  // rounds between policy checkpoints; 0 = never

  int effective_initial_batch() const {
    return initial_batch_size > 0 ? initial_batch_size : batch_size;
  }
  void validate() const;
};

struct RoundRecord {
  int round = 0;
  std::vector<ScoredSequence> selected;
  double batch_max = 0.0;
  double batch_mean = 0.0;
  double cumulative_max = 0.0;
  std::size_t pool_size = 0;
  double wall_time_sec = 0.0;
  long long total_queries = 0;  // ledger total after this round
};

struct CampaignResult {
  std::vector<RoundRecord> records;  // index 0 is the random initial batch
  Dataset dataset;
  QueryLedger ledger;
  std::vector<double> theta0;  // final meta-parameters
};

// Full campaign: round 0 queries an initial batch from a freshly initialized
// random policy; each later round meta-trains the generator on the queried
// data, generates a candidate pool, selects greedily by acquisition value,
// queries the oracle, and appends to the dataset. Deterministic in
// master_seed; every child stream is derived by counter-based splitting.
CampaignResult run_campaign(const CampaignConfig& cfg);

// Distinct sequences sampled from a freshly initialized random policy over
// the oracle geometry, deduplicated against the dataset. Shared by the
// model-based campaign and the baselines so every method starts identically.
std::vector<Sequence> random_policy_batch(const oracles::OracleSpec& oracle,
                                          const Dataset& data, int count,
                                          std::uint64_t seed);

std::string rounds_csv_header();
std::string round_csv_line(const RoundRecord& record);
void write_rounds_csv(const std::string& path,
                      const std::vector<RoundRecord>& records);

}  // namespace metarlbo::bo
