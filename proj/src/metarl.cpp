#include "metarlbo/metarl.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace metarlbo::metarl {

DistanceKind distance_kind_from_string(const std::string& name) {
  if (name == "hamming") return DistanceKind::hamming;
  if (name == "edit") return DistanceKind::edit;
  throw std::invalid_argument("unknown distance kind '" + name +
                              "' (expected hamming|edit)");
}

DensWeighting dens_weighting_from_string(const std::string& name) {
  if (name == "linear") return DensWeighting::linear;
  if (name == "uniform") return DensWeighting::uniform;
  throw std::invalid_argument("unknown dens weighting '" + name +
                              "' (expected linear|uniform)");
}

void TaskSamplerConfig::validate() const {
  if (!(p > 0.0) || p > 1.0) {
    throw std::invalid_argument("task sampler: p must be in (0, 1]");
  }
  proxy_spec.validate();
  proxy_train.validate();
  if (lambda < 0.0) {
    throw std::invalid_argument("task sampler: lambda must be >= 0");
  }
  if (!(epsilon > 0.0)) {
    throw std::invalid_argument("task sampler: epsilon must be > 0");
  }
  if (!(gamma > 0.0 && gamma <= 1.0)) {
    throw std::invalid_argument("task sampler: gamma must be in (0, 1]");
  }
}

void MetaConfig::validate() const {
  if (tasks_per_update < 1) {
    throw std::invalid_argument("meta config: V must be >= 1");
  }
  if (inner_steps < 0) {
    throw std::invalid_argument("meta config: K must be >= 0");
  }
  if (!(eta >= 0.0)) throw std::invalid_argument("meta config: eta >= 0");
  if (meta_iters < 0) {
    throw std::invalid_argument("meta config: meta_iters must be >= 0");
  }
  rl.validate();
}

void GenPhaseConfig::validate() const {
  if (generation_tasks < 1) {
    throw std::invalid_argument("generation config: Q must be >= 1");
  }
  if (per_policy < 1) {
    throw std::invalid_argument("generation config: per_policy must be >= 1");
  }
  if (finetune_steps < 0) {
    throw std::invalid_argument("generation config: finetune steps >= 0");
  }
}

double dens_epsilon(const Sequence& s, const Dataset& data, double epsilon,
                    DistanceKind distance, DensWeighting weighting) {
  if (!(epsilon > 0.0)) {
    throw std::invalid_argument("dens_epsilon: epsilon must be > 0");
  }
  const int cap = static_cast<int>(std::ceil(epsilon));
  double total = 0.0;
  for (const auto& entry : data.entries()) {
    int d;
    if (distance == DistanceKind::hamming) {
      if (entry.seq.size() != s.size()) continue;
      d = seqcore::bounded_hamming_distance(s, entry.seq, cap);
    } else {
      d = seqcore::bounded_edit_distance(s, entry.seq, cap);
    }
    if (static_cast<double>(d) < epsilon) {
      total += weighting == DensWeighting::linear
                   ? 1.0 - static_cast<double>(d) / epsilon
                   : 1.0;
    }
  }
  return total;
}

SampledTask sample_task(const Dataset& data, const TaskSamplerConfig& cfg,
                        std::uint64_t seed) {
  cfg.validate();
  if (data.empty()) {
    throw std::invalid_argument("sample_task: dataset is empty");
  }

  surrogate::TrainConfig train_cfg = cfg.proxy_train;
  train_cfg.seed = derive_seed(seed, "task_proxy");

  std::shared_ptr<const surrogate::ProxyModel> proxy;
  if (cfg.p < 1.0) {
    Rng sub_rng(derive_seed(seed, "task_subsample"));
    const auto subset = data.subsample(cfg.p, sub_rng);
    proxy = std::make_shared<const surrogate::ProxyModel>(
        surrogate::train_regressor(cfg.proxy_spec, subset, train_cfg));
  } else {
    proxy = std::make_shared<const surrogate::ProxyModel>(
        surrogate::train_regressor(cfg.proxy_spec, data.entries(), train_cfg));
  }

  SampledTask task;
  task.proxy = proxy;
  task.env.alphabet = data.alphabet();
  task.env.horizon = cfg.proxy_spec.max_length;
  task.env.variable_length = cfg.variable_length;
  task.env.gamma = cfg.gamma;
  const Dataset* queried = &data;
  const double lambda = cfg.lambda;
  const double epsilon = cfg.epsilon;
  const DistanceKind distance = cfg.distance;
  const DensWeighting weighting = cfg.weighting;
  task.env.reward_fn = [proxy, queried, lambda, epsilon, distance,
                        weighting](const Sequence& s) {
    double reward = proxy->predict(s);
    if (lambda > 0.0) {
      reward -= lambda * dens_epsilon(s, *queried, epsilon, distance, weighting);
    }
    return reward;
  };
  return task;
}

std::vector<double> meta_train(std::vector<double> theta0,
                               const policy::PolicyNet& net,
                               const Dataset& data, const MetaConfig& meta,
                               const TaskSamplerConfig& tasks,
                               std::uint64_t seed) {
  meta.validate();
  if (theta0.size() != net.param_count()) {
    throw std::invalid_argument("meta_train: wrong parameter count");
  }

  const auto v = static_cast<std::uint64_t>(meta.tasks_per_update);
  std::vector<double> grad_sum(theta0.size());
  for (int iter = 0; iter < meta.meta_iters; ++iter) {
    std::fill(grad_sum.begin(), grad_sum.end(), 0.0);
    for (int i = 0; i < meta.tasks_per_update; ++i) {
      const std::uint64_t task_counter =
          static_cast<std::uint64_t>(iter) * v + static_cast<std::uint64_t>(i);
      const SampledTask task =
          sample_task(data, tasks, derive_seed(seed, "meta_task", task_counter));
      Rng rollout_rng(derive_seed(seed, "meta_rollout", task_counter));

      std::vector<double> adapted = theta0;
      for (int k = 0; k < meta.inner_steps; ++k) {
        adapted =
            policy::inner_update(adapted, net, task.env, meta.rl, rollout_rng);
      }
      const auto trajectories = policy::sample_trajectories(
          adapted, net, task.env, meta.rl.trajectories_per_update, rollout_rng);
      const policy::LossGrad lg = policy::reinforce_loss(
          adapted, net, trajectories, meta.rl.entropy_coeff, task.env.gamma,
          task.env.variable_length);
      for (std::size_t j = 0; j < grad_sum.size(); ++j) {
        grad_sum[j] += lg.grad[j];
      }
    }
    const double step = meta.eta / static_cast<double>(meta.tasks_per_update);
    bool finite = true;
    for (std::size_t j = 0; j < theta0.size(); ++j) {
      theta0[j] -= step * grad_sum[j];
      finite = finite && std::isfinite(theta0[j]);
    }
    if (!finite) {
      throw std::runtime_error("meta_train: non-finite meta-gradient at iteration " +
                               std::to_string(iter));
    }
  }
  return theta0;
}

GenerationResult finetune_and_generate(std::span<const double> theta0,
                                       const policy::PolicyNet& net,
                                       const Dataset& data,
                                       const GenPhaseConfig& gen,
                                       const TaskSamplerConfig& tasks,
                                       const policy::RLConfig& rl,
                                       std::uint64_t seed) {
  gen.validate();
  if (theta0.size() != net.param_count()) {
    throw std::invalid_argument("finetune_and_generate: wrong parameter count");
  }

  std::vector<surrogate::ProxyModel> proxies;
  proxies.reserve(static_cast<std::size_t>(gen.generation_tasks));
  std::vector<Sequence> pool;
  std::unordered_set<Sequence, seqcore::SequenceHash> seen;

  for (int q = 0; q < gen.generation_tasks; ++q) {
    const auto qc = static_cast<std::uint64_t>(q);
    const SampledTask task =
        sample_task(data, tasks, derive_seed(seed, "gen_task", qc));
    Rng rollout_rng(derive_seed(seed, "gen_rollout", qc));

    std::vector<double> adapted;
    if (gen.from_scratch) {
      adapted.resize(net.param_count());
      Rng init_rng(derive_seed(seed, "gen_scratch_init", qc));
      net.init_params(adapted, init_rng);
    } else {
      adapted.assign(theta0.begin(), theta0.end());
    }
    for (int k = 0; k < gen.finetune_steps; ++k) {
      adapted = policy::inner_update(adapted, net, task.env, rl, rollout_rng);
    }

    const auto sequences = policy::sample_sequences(
        adapted, net, task.env, gen.per_policy, rollout_rng);
    for (const auto& s : sequences) {
      if (data.contains(s)) continue;
      if (!seen.insert(s).second) continue;
      pool.push_back(s);
    }
    proxies.push_back(*task.proxy);
  }

  if (pool.empty()) {
    throw std::runtime_error(
        "generation produced no novel sequences; increase per_policy or the "
        "entropy bonus");
  }

  GenerationResult result{std::move(pool),
                          surrogate::ProxyEnsemble(std::move(proxies))};
  return result;
}

}  // namespace metarlbo::metarl
