#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "metarlbo/bayesopt.hpp"
#include "metarlbo/dataset.hpp"
#include "metarlbo/oracles.hpp"
#include "metarlbo/rng.hpp"

namespace metarlbo::bench {

using seqcore::Dataset;
using seqcore::Sequence;

enum class BaselineKind { random_mutation, genetic };

BaselineKind baseline_kind_from_string(const std::string& name);
std::string to_string(BaselineKind kind);

struct BaselineSpec {
  BaselineKind kind = BaselineKind::random_mutation;
  // random_mutation: independent per-position substitution probability.
  // genetic: probability that the single-point mutation is applied at all
  // (0 turns mutation off).
  double mutation_rate = 0.05;
  int population = 100;
  double recombination_rate = 0.5;

  void validate() const;
};

// B children, each a uniformly chosen parent from the dataset with every
// position substituted independently (uniform over the other tokens) with
// probability mutation_rate. Children colliding with queried or batch
// sequences are resampled up to 10 times, then replaced by fresh uniform
// random sequences.
std::vector<Sequence> baseline_random_batch(const Dataset& data, int batch_size,
                                            const BaselineSpec& spec,
                                            Rng& rng);

// Wright-Fisher style: a population is resampled from the dataset with
// probability proportional to max(score - min_score, 1e-6); offspring come
// from single-point crossover between population members (with probability
// recombination_rate) followed by an optional single-point mutation, with the
// same dedup-and-fallback rule as the random baseline.
std::vector<Sequence> baseline_genetic_batch(const Dataset& data,
                                             int batch_size,
                                             const BaselineSpec& spec,
                                             Rng& rng);

struct BaselineCampaignConfig {
  int rounds = 1;
  int batch_size = 1;
  int initial_batch_size = 0;  // 0 means batch_size
  BaselineSpec baseline;
  oracles::OracleSpec oracle;
  std::uint64_t master_seed = 0;
  bool deterministic_output = false;
  std::string out_dir;

  int effective_initial_batch() const {
    return initial_batch_size > 0 ? initial_batch_size : batch_size;
  }
  void validate() const;
};

// Same round protocol and query accounting as the model-based campaign, with
// the candidate batch produced by the configured baseline. The initial batch
// comes from the same random-policy source.
bo::CampaignResult run_baseline_campaign(const BaselineCampaignConfig& cfg);

}  // namespace metarlbo::bench
