#include "metarlbo/baselines.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <unordered_set>

#include <json.hpp>

namespace metarlbo::bench {

namespace fs = std::filesystem;
using seqcore::SequenceHash;

BaselineKind baseline_kind_from_string(const std::string& name) {
  if (name == "random" || name == "random_mutation") {
    return BaselineKind::random_mutation;
  }
  if (name == "genetic") return BaselineKind::genetic;
  throw std::invalid_argument("unknown baseline '" + name +
                              "' (expected random|genetic)");
}

std::string to_string(BaselineKind kind) {
  return kind == BaselineKind::random_mutation ? "random" : "genetic";
}

void BaselineSpec::validate() const {
  if (!(mutation_rate >= 0.0 && mutation_rate <= 1.0)) {
    throw std::invalid_argument("baseline mutation_rate must be in [0, 1]");
  }
  if (!(recombination_rate >= 0.0 && recombination_rate <= 1.0)) {
    throw std::invalid_argument(
        "baseline recombination_rate must be in [0, 1]");
  }
  if (kind == BaselineKind::genetic && population < 2) {
    throw std::invalid_argument("genetic baseline needs population >= 2");
  }
}

namespace {

std::uint8_t other_token(std::uint8_t current, int alphabet_size, Rng& rng) {
  auto t = static_cast<std::uint8_t>(
      rng.uniform_int(static_cast<std::uint64_t>(alphabet_size - 1)));
  if (t >= current) ++t;
  return t;
}

Sequence fresh_random(const Dataset& data, Rng& rng, std::size_t length_hint) {
  Sequence s;
  s.tokens.resize(length_hint);
  const auto a = static_cast<std::uint64_t>(data.alphabet().size());
  for (auto& t : s.tokens) {
    t = static_cast<std::uint8_t>(rng.uniform_int(a));
  }
  return s;
}

// Dedup-with-fallback shared by both baselines: `propose` may return
// duplicates for up to 10 attempts, after which fresh uniform random
// sequences are accepted instead.
template <typename Propose>
std::vector<Sequence> fill_batch(const Dataset& data, int batch_size,
                                 Rng& rng, Propose&& propose) {
  std::vector<Sequence> batch;
  std::unordered_set<Sequence, SequenceHash> seen;
  auto is_new = [&](const Sequence& s) {
    return !data.contains(s) && seen.find(s) == seen.end();
  };
  while (static_cast<int>(batch.size()) < batch_size) {
    Sequence candidate;
    bool accepted = false;
    for (int attempt = 0; attempt < 10; ++attempt) {
      candidate = propose();
      if (is_new(candidate)) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      std::uint64_t guard = 0;
      do {
        candidate = fresh_random(data, rng, candidate.size());
        if (++guard > 100000) {
          throw std::runtime_error(
              "baseline could not find an unqueried sequence; search space "
              "exhausted");
        }
      } while (!is_new(candidate));
    }
    seen.insert(candidate);
    batch.push_back(std::move(candidate));
  }
  return batch;
}

}  // namespace

std::vector<Sequence> baseline_random_batch(const Dataset& data,
                                            int batch_size,
                                            const BaselineSpec& spec,
                                            Rng& rng) {
  spec.validate();
  if (data.empty()) {
    throw std::invalid_argument("random baseline needs a nonempty dataset");
  }
  const int a = data.alphabet().size();
  return fill_batch(data, batch_size, rng, [&]() {
    const auto& parent =
        data.entry(rng.uniform_int(static_cast<std::uint64_t>(data.size())));
    Sequence child = parent.seq;
    for (auto& t : child.tokens) {
      if (rng.uniform() < spec.mutation_rate) t = other_token(t, a, rng);
    }
    return child;
  });
}

std::vector<Sequence> baseline_genetic_batch(const Dataset& data,
                                             int batch_size,
                                             const BaselineSpec& spec,
                                             Rng& rng) {
  spec.validate();
  if (data.empty()) {
    throw std::invalid_argument("genetic baseline needs a nonempty dataset");
  }
  const int a = data.alphabet().size();

  // Fitness-proportional resampling with a floor so zero-spread scores
  // degrade to uniform selection.
  double min_score = data.entry(0).score;
  for (const auto& e : data.entries()) min_score = std::min(min_score, e.score);
  std::vector<double> cumulative(data.size());
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    total += std::max(data.entry(i).score - min_score, 1e-6);
    cumulative[i] = total;
  }
  auto sample_parent_index = [&]() {
    const double u = rng.uniform() * total;
    return static_cast<std::size_t>(
        std::lower_bound(cumulative.begin(), cumulative.end(), u) -
        cumulative.begin());
  };
  std::vector<const Sequence*> population;
  population.reserve(static_cast<std::size_t>(spec.population));
  for (int i = 0; i < spec.population; ++i) {
    population.push_back(&data.entry(sample_parent_index()).seq);
  }

  return fill_batch(data, batch_size, rng, [&]() {
    const auto pop = static_cast<std::uint64_t>(population.size());
    const Sequence& p1 = *population[rng.uniform_int(pop)];
    const Sequence& p2 = *population[rng.uniform_int(pop)];
    Sequence child;
    const std::size_t min_len = std::min(p1.size(), p2.size());
    if (min_len >= 2 && rng.uniform() < spec.recombination_rate) {
      const auto k = static_cast<std::size_t>(
          1 + rng.uniform_int(static_cast<std::uint64_t>(min_len - 1)));
      child.tokens.assign(p1.tokens.begin(),
                          p1.tokens.begin() + static_cast<long>(k));
      child.tokens.insert(child.tokens.end(),
                          p2.tokens.begin() + static_cast<long>(k),
                          p2.tokens.end());
    } else {
      child = p1;
    }
    if (!child.empty() && rng.uniform() < spec.mutation_rate) {
      const auto pos = static_cast<std::size_t>(
          rng.uniform_int(static_cast<std::uint64_t>(child.size())));
      child.tokens[pos] = other_token(child.tokens[pos], a, rng);
    }
    return child;
  });
}

void BaselineCampaignConfig::validate() const {
  if (rounds < 1) throw std::invalid_argument("baseline campaign: rounds >= 1");
  if (batch_size < 1) {
    throw std::invalid_argument("baseline campaign: batch size >= 1");
  }
  baseline.validate();
  oracle.validate();
}

bo::CampaignResult run_baseline_campaign(const BaselineCampaignConfig& cfg) {
  cfg.validate();
  const oracles::Oracle oracle(cfg.oracle);
  bo::CampaignResult result{{}, Dataset(cfg.oracle.alphabet), {}, {}};

  using clock = std::chrono::steady_clock;
  auto push_record = [&](int round, const std::vector<Sequence>& batch,
                         const std::vector<double>& scores, double secs) {
    bo::RoundRecord rec;
    rec.round = round;
    rec.total_queries = result.ledger.total;
    rec.pool_size = batch.size();
    rec.wall_time_sec = cfg.deterministic_output ? 0.0 : secs;
    double best = scores[0], sum = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      best = std::max(best, scores[i]);
      sum += scores[i];
      rec.selected.push_back(
          seqcore::ScoredSequence{batch[i], scores[i], round});
    }
    rec.batch_max = best;
    rec.batch_mean = sum / static_cast<double>(scores.size());
    rec.cumulative_max = result.dataset.best_score();
    result.records.push_back(std::move(rec));
  };

  {
    const auto start = clock::now();
    const auto batch = bo::random_policy_batch(
        cfg.oracle, result.dataset, cfg.effective_initial_batch(),
        derive_seed(cfg.master_seed, "round", 0));
    const auto scores = oracles::query_batch(oracle, batch, result.ledger, 0);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      result.dataset.insert(batch[i], scores[i], 0);
    }
    push_record(0, batch, scores,
                std::chrono::duration<double>(clock::now() - start).count());
  }

  for (int round = 1; round <= cfg.rounds; ++round) {
    const auto start = clock::now();
    Rng rng(derive_seed(cfg.master_seed, "round",
                        static_cast<std::uint64_t>(round)));
    const auto batch =
        cfg.baseline.kind == BaselineKind::random_mutation
            ? baseline_random_batch(result.dataset, cfg.batch_size,
                                    cfg.baseline, rng)
            : baseline_genetic_batch(result.dataset, cfg.batch_size,
                                     cfg.baseline, rng);
    const auto scores =
        oracles::query_batch(oracle, batch, result.ledger, round);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      result.dataset.insert(batch[i], scores[i], round);
    }
    push_record(round, batch, scores,
                std::chrono::duration<double>(clock::now() - start).count());
  }

  if (!cfg.out_dir.empty()) {
    fs::create_directories(cfg.out_dir);
    bo::write_rounds_csv((fs::path(cfg.out_dir) / "rounds.csv").string(),
                         result.records);
    result.dataset.save((fs::path(cfg.out_dir) / "dataset.tsv").string());
    nlohmann::json manifest;
    manifest["format"] = "metarlbo-run v1";
    manifest["status"] = "completed";
    manifest["master_seed"] = cfg.master_seed;
    manifest["config"] = {
        {"method", to_string(cfg.baseline.kind)},
        {"rounds", cfg.rounds},
        {"batch_size", cfg.batch_size},
        {"initial_batch_size", cfg.effective_initial_batch()},
        {"oracle", oracles::to_string(cfg.oracle.kind)},
        {"alphabet", cfg.oracle.alphabet.symbols()},
        {"min_length", cfg.oracle.min_length},
        {"max_length", cfg.oracle.max_length},
        {"oracle_seed", cfg.oracle.seed},
        {"mutation_rate", cfg.baseline.mutation_rate},
        {"population", cfg.baseline.population},
        {"recombination_rate", cfg.baseline.recombination_rate},
        {"deterministic_output", cfg.deterministic_output},
    };
    manifest["total_queries"] = result.ledger.total;
    manifest["per_round_queries"] = result.ledger.per_round;
    manifest["checkpoints"] = nlohmann::json::array();
    std::ofstream out(fs::path(cfg.out_dir) / "manifest.json");
    out << manifest.dump(2) << '\n';
  }
  return result;
}

}  // namespace metarlbo::bench
