#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "metarlbo/dataset.hpp"
#include "metarlbo/policy.hpp"
#include "metarlbo/surrogate.hpp"

namespace metarlbo::metarl {

using seqcore::Dataset;
using seqcore::Sequence;

enum class DistanceKind { hamming, edit };
enum class DensWeighting { linear, uniform };

DistanceKind distance_kind_from_string(const std::string& name);
DensWeighting dens_weighting_from_string(const std::string& name);

// Proxy-MDP induction: proxy training recipe plus the reward shaping
// r(s) = proxy(s) - lambda * dens_eps(s, queried data).
struct TaskSamplerConfig {
  double p = 1.0;
  surrogate::RegressorSpec proxy_spec;
  surrogate::TrainConfig proxy_train;
  double lambda = 0.0;
  double epsilon = 2.0;
  DistanceKind distance = DistanceKind::hamming;
  DensWeighting weighting = DensWeighting::linear;
  bool variable_length = false;
  double gamma = 1.0;

  void validate() const;
};

struct MetaConfig {
  int tasks_per_update = 4;  // V
  int inner_steps = 2;       // K; 0 collapses meta-training to REINFORCE
  double eta = 0.01;
  int meta_iters = 50;
  policy::RLConfig rl;

  void validate() const;
};

struct GenPhaseConfig {
  int generation_tasks = 32;  // Q
  int per_policy = 64;
  int finetune_steps = 2;
  // Ablation mode: adapt each generation policy from a fresh random
  // initialization instead of the meta-learned one.
  bool from_scratch = false;

  void validate() const;
};

// Weighted count of queried sequences within distance epsilon of s. Linear
// weighting contributes 1 - d/epsilon per neighbor, uniform contributes 1.
// Hamming distances are only defined between equal lengths; other pairs are
// treated as out of range.
double dens_epsilon(const Sequence& s, const Dataset& data, double epsilon,
                    DistanceKind distance, DensWeighting weighting);

struct SampledTask {
  policy::GenEnv env;
  std::shared_ptr<const surrogate::ProxyModel> proxy;
};

// Trains a proxy on a p-subsample of the dataset and wraps it, together with
// the diversity penalty, as the terminal reward of a generation environment.
// The env borrows the dataset; it stays valid until the next dataset write.
SampledTask sample_task(const Dataset& data, const TaskSamplerConfig& cfg,
                        std::uint64_t seed);

// First-order meta-training: per iteration, V tasks are sampled, a copy of
// theta0 is adapted for K REINFORCE steps on each, and theta0 moves along the
// average post-adaptation gradient (no differentiation through the inner
// steps).
std::vector<double> meta_train(std::vector<double> theta0,
                               const policy::PolicyNet& net,
                               const Dataset& data, const MetaConfig& meta,
                               const TaskSamplerConfig& tasks,
                               std::uint64_t seed);

struct GenerationResult {
  std::vector<Sequence> pool;  // deduplicated, disjoint from queried data
  surrogate::ProxyEnsemble ensemble;
};

// Samples Q tasks, fine-tunes a copy of theta0 on each, and pools per_policy
// sequences per policy. The Q proxies are returned as the selection
// surrogate. theta0 itself is never modified.
GenerationResult finetune_and_generate(std::span<const double> theta0,
                                       const policy::PolicyNet& net,
                                       const Dataset& data,
                                       const GenPhaseConfig& gen,
                                       const TaskSamplerConfig& tasks,
                                       const policy::RLConfig& rl,
                                       std::uint64_t seed);

}  // namespace metarlbo::metarl
