#include "metarlbo/bayesopt.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <unordered_set>

#include <json.hpp>

#include "metarlbo/checkpoint.hpp"
#include "metarlbo/policy.hpp"

namespace metarlbo::bo {

namespace fs = std::filesystem;

AcquisitionKind acquisition_kind_from_string(const std::string& name) {
  if (name == "ucb") return AcquisitionKind::ucb;
  if (name == "posterior_mean" || name == "post") {
    return AcquisitionKind::posterior_mean;
  }
  throw std::invalid_argument("unknown acquisition '" + name +
                              "' (expected ucb|posterior_mean)");
}

std::string to_string(AcquisitionKind kind) {
  return kind == AcquisitionKind::ucb ? "ucb" : "posterior_mean";
}

void AcquisitionSpec::validate() const {
  if (!(beta >= 0.0)) {
    throw std::invalid_argument("acquisition beta must be >= 0");
  }
}

double acquire(const AcquisitionSpec& spec,
               const surrogate::ProxyEnsemble& ensemble, const Sequence& s) {
  const surrogate::MuSigma p = ensemble.predict(s);
  if (spec.kind == AcquisitionKind::posterior_mean) return p.mu;
  return p.mu + spec.beta * p.sigma;
}

std::vector<Sequence> select_batch(const std::vector<Sequence>& pool,
                                   const surrogate::ProxyEnsemble& ensemble,
                                   const AcquisitionSpec& spec,
                                   int batch_size) {
  spec.validate();
  if (batch_size < 1) {
    throw std::invalid_argument("select_batch: batch size must be >= 1");
  }
  if (pool.empty()) {
    throw std::invalid_argument("select_batch: empty candidate pool");
  }
  std::vector<double> value(pool.size());
  surrogate::Scratch scratch;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const surrogate::MuSigma p = ensemble.predict(pool[i], scratch);
    value[i] = spec.kind == AcquisitionKind::posterior_mean
                   ? p.mu
                   : p.mu + spec.beta * p.sigma;
  }
  std::vector<std::size_t> order(pool.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (value[a] != value[b]) return value[a] > value[b];
    return pool[a] < pool[b];
  });
  const std::size_t take =
      std::min(pool.size(), static_cast<std::size_t>(batch_size));
  std::vector<Sequence> batch;
  batch.reserve(take);
  for (std::size_t i = 0; i < take; ++i) batch.push_back(pool[order[i]]);
  return batch;
}

void CampaignConfig::validate() const {
  if (rounds < 1) throw std::invalid_argument("campaign: rounds must be >= 1");
  if (batch_size < 1) {
    throw std::invalid_argument("campaign: batch size must be >= 1");
  }
  if (initial_batch_size < 0) {
    throw std::invalid_argument("campaign: initial batch size must be >= 0");
  }
  acquisition.validate();
  meta.validate();
  gen.validate();
  tasks.validate();
  oracle.validate();
}

std::string rounds_csv_header() {
  return "round,queries,batch_max,batch_mean,cum_max,pool_size,wall_time";
}

std::string round_csv_line(const RoundRecord& r) {
  char buf[192];
  std::snprintf(buf, sizeof buf, "%d,%lld,%.12g,%.12g,%.12g,%zu,%.3f",
                r.round, r.total_queries, r.batch_max, r.batch_mean,
                r.cumulative_max, r.pool_size, r.wall_time_sec);
  return buf;
}

void write_rounds_csv(const std::string& path,
                      const std::vector<RoundRecord>& records) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << rounds_csv_header() << '\n';
  for (const auto& r : records) out << round_csv_line(r) << '\n';
}

namespace {

// Uniform random sequence respecting the oracle geometry.
Sequence random_sequence(const oracles::OracleSpec& spec, Rng& rng) {
  int len = spec.max_length;
  if (!spec.fixed_length()) {
    len = spec.min_length +
          static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(
              spec.max_length - spec.min_length + 1)));
  }
  Sequence s;
  s.tokens.resize(static_cast<std::size_t>(len));
  for (auto& t : s.tokens) {
    t = static_cast<std::uint8_t>(
        rng.uniform_int(static_cast<std::uint64_t>(spec.alphabet.size())));
  }
  return s;
}

}  // namespace

std::vector<Sequence> random_policy_batch(const oracles::OracleSpec& oracle,
                                          const Dataset& data, int count,
                                          std::uint64_t seed) {
  const bool variable = !oracle.fixed_length();
  const policy::PolicyNet net(oracle.max_length,
                              oracle.alphabet.size() + (variable ? 1 : 0));
  std::vector<double> params(net.param_count());
  Rng init_rng(derive_seed(seed, "b0_init"));
  net.init_params(params, init_rng);

  policy::GenEnv env;
  env.alphabet = oracle.alphabet;
  env.horizon = oracle.max_length;
  env.variable_length = variable;
  env.gamma = 1.0;
  env.reward_fn = [](const Sequence&) { return 0.0; };

  Rng rng(derive_seed(seed, "b0_rollouts"));
  std::vector<Sequence> batch;
  std::unordered_set<Sequence, seqcore::SequenceHash> seen;
  for (int attempt = 0; attempt < 200 && static_cast<int>(batch.size()) < count;
       ++attempt) {
    const auto sequences =
        policy::sample_sequences(params, net, env, count, rng);
    for (const auto& s : sequences) {
      if (static_cast<int>(batch.size()) >= count) break;
      if (data.contains(s) || !seen.insert(s).second) continue;
      batch.push_back(s);
    }
  }
  if (static_cast<int>(batch.size()) < count) {
    throw std::runtime_error(
        "could not draw enough distinct initial sequences; search space too "
        "small for the requested batch");
  }
  return batch;
}

namespace {

void top_up_batch(std::vector<Sequence>& batch, const CampaignConfig& cfg,
                  const Dataset& data, int target, std::uint64_t seed) {
  std::unordered_set<Sequence, seqcore::SequenceHash> seen(batch.begin(),
                                                           batch.end());
  Rng rng(derive_seed(seed, "top_up"));
  std::uint64_t guard = 0;
  const std::uint64_t guard_cap =
      1000ull * static_cast<std::uint64_t>(target) + 1000ull;
  while (static_cast<int>(batch.size()) < target && guard < guard_cap) {
    ++guard;
    Sequence s = random_sequence(cfg.oracle, rng);
    if (data.contains(s) || !seen.insert(s).second) continue;
    batch.push_back(std::move(s));
  }
}

class RunWriter {
 public:
  RunWriter(const CampaignConfig& cfg) : cfg_(cfg) {
    if (cfg_.out_dir.empty()) return;
    fs::create_directories(cfg_.out_dir);
    if (cfg_.checkpoint_every > 0) {
      fs::create_directories(fs::path(cfg_.out_dir) / "checkpoints");
    }
    csv_.open(fs::path(cfg_.out_dir) / "rounds.csv");
    if (!csv_) {
      throw std::runtime_error("cannot open rounds.csv under " + cfg_.out_dir);
    }
    csv_ << rounds_csv_header() << '\n';
    csv_.flush();
  }

  void record(const RoundRecord& r) {
    if (!csv_.is_open()) return;
    csv_ << round_csv_line(r) << '\n';
    csv_.flush();
  }

  void checkpoint(int round, const policy::PolicyNet& net,
                  const std::vector<double>& theta0) {
    if (cfg_.out_dir.empty() || cfg_.checkpoint_every <= 0) return;
    if (round % cfg_.checkpoint_every != 0) return;
    Checkpoint ckpt;
    ckpt.header.emplace_back("kind", "policy");
    ckpt.header.emplace_back("max_length", std::to_string(net.max_length()));
    ckpt.header.emplace_back("action_count",
                             std::to_string(net.action_count()));
    ckpt.header.emplace_back("round", std::to_string(round));
    ckpt.tensors = net.layout().tensors();
    ckpt.values = theta0;
    const auto path = fs::path(cfg_.out_dir) / "checkpoints" /
                      ("theta0_round_" + std::to_string(round) + ".ckpt");
    ckpt.save(path.string());
    checkpoints_.emplace_back(path.string(), file_checksum(path.string()));
  }

  void finish(const Dataset& data, const QueryLedger& ledger,
              const std::string& status) {
    if (cfg_.out_dir.empty()) return;
    data.save((fs::path(cfg_.out_dir) / "dataset.tsv").string());

    nlohmann::json manifest;
    manifest["format"] = "metarlbo-run v1";
    manifest["status"] = status;
    manifest["master_seed"] = cfg_.master_seed;
    manifest["config"] = {
        {"rounds", cfg_.rounds},
        {"batch_size", cfg_.batch_size},
        {"initial_batch_size", cfg_.effective_initial_batch()},
        {"acquisition", to_string(cfg_.acquisition.kind)},
        {"beta", cfg_.acquisition.beta},
        {"oracle", oracles::to_string(cfg_.oracle.kind)},
        {"alphabet", cfg_.oracle.alphabet.symbols()},
        {"min_length", cfg_.oracle.min_length},
        {"max_length", cfg_.oracle.max_length},
        {"oracle_seed", cfg_.oracle.seed},
        {"proxy_arch", surrogate::to_string(cfg_.tasks.proxy_spec.arch)},
        {"tasks_per_update", cfg_.meta.tasks_per_update},
        {"inner_steps", cfg_.meta.inner_steps},
        {"meta_iters", cfg_.meta.meta_iters},
        {"eta", cfg_.meta.eta},
        {"alpha", cfg_.meta.rl.alpha},
        {"entropy_coeff", cfg_.meta.rl.entropy_coeff},
        {"trajectories_per_update", cfg_.meta.rl.trajectories_per_update},
        {"generation_tasks", cfg_.gen.generation_tasks},
        {"per_policy", cfg_.gen.per_policy},
        {"finetune_steps", cfg_.gen.finetune_steps},
        {"from_scratch", cfg_.gen.from_scratch},
        {"subsample_p", cfg_.tasks.p},
        {"lambda", cfg_.tasks.lambda},
        {"epsilon", cfg_.tasks.epsilon},
        {"warm_start_meta", cfg_.warm_start_meta},
        {"deterministic_output", cfg_.deterministic_output},
    };
    manifest["total_queries"] = ledger.total;
    manifest["per_round_queries"] = ledger.per_round;
    auto& list = manifest["checkpoints"] = nlohmann::json::array();
    for (const auto& [path, checksum] : checkpoints_) {
      char hex[32];
      std::snprintf(hex, sizeof hex, "%016llx",
                    static_cast<unsigned long long>(checksum));
      list.push_back({{"file", path}, {"fnv1a64", hex}});
    }
    std::ofstream out(fs::path(cfg_.out_dir) / "manifest.json");
    out << manifest.dump(2) << '\n';
  }

 private:
  const CampaignConfig& cfg_;
  std::ofstream csv_;
  std::vector<std::pair<std::string, std::uint64_t>> checkpoints_;
};

RoundRecord make_record(int round, const std::vector<Sequence>& batch,
                        const std::vector<double>& scores,
                        const Dataset& data, const QueryLedger& ledger,
                        std::size_t pool_size, double seconds,
                        bool deterministic_output) {
  RoundRecord rec;
  rec.round = round;
  rec.total_queries = ledger.total;
  rec.pool_size = pool_size;
  rec.wall_time_sec = deterministic_output ? 0.0 : seconds;
  double best = scores[0], sum = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    best = std::max(best, scores[i]);
    sum += scores[i];
    rec.selected.push_back(ScoredSequence{batch[i], scores[i], round});
  }
  rec.batch_max = best;
  rec.batch_mean = sum / static_cast<double>(scores.size());
  rec.cumulative_max = data.best_score();
  return rec;
}

}  // namespace

CampaignResult run_campaign(const CampaignConfig& user_cfg) {
  CampaignConfig cfg = user_cfg;
  // The oracle geometry is the single source of truth for the generator and
  // proxy input shapes.
  cfg.tasks.proxy_spec.max_length = cfg.oracle.max_length;
  cfg.tasks.proxy_spec.alphabet_size = cfg.oracle.alphabet.size();
  cfg.tasks.variable_length = !cfg.oracle.fixed_length();
  cfg.tasks.gamma = cfg.meta.rl.gamma;
  cfg.validate();

  const oracles::Oracle oracle(cfg.oracle);
  const policy::PolicyNet net(
      cfg.oracle.max_length,
      cfg.oracle.alphabet.size() + (cfg.oracle.fixed_length() ? 0 : 1));

  CampaignResult result{{}, Dataset(cfg.oracle.alphabet), {}, {}};
  RunWriter writer(cfg);

  result.theta0.resize(net.param_count());
  {
    Rng theta_rng(derive_seed(cfg.master_seed, "theta0_init"));
    net.init_params(result.theta0, theta_rng);
  }

  int current_round = 0;
  try {
    using clock = std::chrono::steady_clock;
    {
      const auto start = clock::now();
      const int b0 = cfg.effective_initial_batch();
      auto batch = random_policy_batch(cfg.oracle, result.dataset, b0,
                                       derive_seed(cfg.master_seed, "round", 0));
      const auto scores = query_batch(oracle, batch, result.ledger, 0);
      for (std::size_t i = 0; i < batch.size(); ++i) {
        result.dataset.insert(batch[i], scores[i], 0);
      }
      const double secs =
          std::chrono::duration<double>(clock::now() - start).count();
      result.records.push_back(make_record(0, batch, scores, result.dataset,
                                           result.ledger, batch.size(), secs,
                                           cfg.deterministic_output));
      writer.record(result.records.back());
    }

    for (int round = 1; round <= cfg.rounds; ++round) {
      current_round = round;
      const auto start = clock::now();
      const std::uint64_t round_seed =
          derive_seed(cfg.master_seed, "round", static_cast<std::uint64_t>(round));

      if (!cfg.gen.from_scratch) {
        metarl::MetaConfig meta = cfg.meta;
        if (!cfg.warm_start_meta && round > 1) {
          Rng theta_rng(derive_seed(cfg.master_seed, "theta0_reinit",
                                    static_cast<std::uint64_t>(round)));
          net.init_params(result.theta0, theta_rng);
        }
        if (cfg.warm_start_meta && round > 1 && cfg.meta_iters_warm >= 0) {
          meta.meta_iters = cfg.meta_iters_warm;
        }
        result.theta0 =
            metarl::meta_train(std::move(result.theta0), net, result.dataset,
                               meta, cfg.tasks, derive_seed(round_seed, "meta"));
      }

      auto generation = metarl::finetune_and_generate(
          result.theta0, net, result.dataset, cfg.gen, cfg.tasks, cfg.meta.rl,
          derive_seed(round_seed, "generation"));

      const surrogate::ProxyEnsemble* selector = &generation.ensemble;
      surrogate::ProxyEnsemble fresh;
      if (cfg.fresh_selection_ensemble) {
        fresh = surrogate::build_ensemble(
            cfg.tasks.proxy_spec, result.dataset, cfg.gen.generation_tasks,
            cfg.tasks.p, cfg.tasks.proxy_train,
            derive_seed(round_seed, "fresh_ensemble"));
        selector = &fresh;
      }

      auto batch =
          select_batch(generation.pool, *selector, cfg.acquisition,
                       cfg.batch_size);
      if (cfg.top_up_underfull &&
          static_cast<int>(batch.size()) < cfg.batch_size) {
        top_up_batch(batch, cfg, result.dataset, cfg.batch_size, round_seed);
      }

      const auto scores = query_batch(oracle, batch, result.ledger, round);
      for (std::size_t i = 0; i < batch.size(); ++i) {
        result.dataset.insert(batch[i], scores[i], round);
      }

      const double secs =
          std::chrono::duration<double>(clock::now() - start).count();
      result.records.push_back(make_record(
          round, batch, scores, result.dataset, result.ledger,
          generation.pool.size(), secs, cfg.deterministic_output));
      writer.record(result.records.back());
      writer.checkpoint(round, net, result.theta0);
    }
  } catch (const std::exception& e) {
    writer.finish(result.dataset, result.ledger,
                  "failed at round " + std::to_string(current_round));
    throw std::runtime_error("campaign failed at round " +
                             std::to_string(current_round) + ": " + e.what());
  }

  writer.finish(result.dataset, result.ledger, "completed");
  return result;
}

}  // namespace metarlbo::bo
