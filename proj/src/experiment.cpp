#include "metarlbo/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace metarlbo::bench {

namespace fs = std::filesystem;

Method method_from_string(const std::string& name) {
  if (name == "metarlbo") return Method::metarlbo;
  if (name == "policy_ensemble") return Method::policy_ensemble;
  if (name == "random") return Method::random;
  if (name == "genetic") return Method::genetic;
  throw ConfigError(
      "experiment.method: unknown method '" + name +
      "' (expected metarlbo|policy_ensemble|random|genetic)");
}

std::string to_string(Method method) {
  switch (method) {
    case Method::metarlbo: return "metarlbo";
    case Method::policy_ensemble: return "policy_ensemble";
    case Method::random: return "random";
    case Method::genetic: return "genetic";
  }
  return "?";
}

namespace {

oracles::OracleSpec load_oracle_spec(const Config& cfg) {
  oracles::OracleSpec spec;
  try {
    spec.kind = oracles::oracle_kind_from_string(cfg.get_string("oracle.kind"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("oracle.kind: ") + e.what());
  }
  const std::string alphabet = cfg.get_string("oracle.alphabet");
  try {
    spec.alphabet = seqcore::Alphabet(alphabet, cfg.get_bool_or("oracle.eos", false));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("oracle.alphabet: ") + e.what());
  }
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
  try {
    spec.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("oracle: ") + e.what());
  }
  return spec;
}

bo::CampaignConfig load_campaign_config(const Config& cfg,
                                        const oracles::OracleSpec& oracle) {
  bo::CampaignConfig c;
  c.oracle = oracle;
  c.rounds = static_cast<int>(cfg.get_int("campaign.rounds"));
  c.batch_size = static_cast<int>(cfg.get_int("campaign.batch_size"));
  c.initial_batch_size =
      static_cast<int>(cfg.get_int_or("campaign.initial_batch_size", 0));
  try {
    c.acquisition.kind = bo::acquisition_kind_from_string(
        cfg.get_string_or("campaign.acquisition", "ucb"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("campaign.acquisition: ") + e.what());
  }
  c.acquisition.beta = cfg.get_double_or("campaign.beta", 1.0);
  c.warm_start_meta = cfg.get_bool_or("campaign.warm_start_meta", true);
  c.meta_iters_warm =
      static_cast<int>(cfg.get_int_or("campaign.meta_iters_warm", -1));
  c.top_up_underfull = cfg.get_bool_or("campaign.top_up_underfull", true);
  c.fresh_selection_ensemble =
      cfg.get_bool_or("campaign.fresh_selection_ensemble", false);
  c.deterministic_output =
      cfg.get_bool_or("campaign.deterministic_output", false);
  c.checkpoint_every =
      static_cast<int>(cfg.get_int_or("campaign.checkpoint_every", 1));

  c.meta.tasks_per_update = static_cast<int>(cfg.get_int_or("meta.V", 4));
  c.meta.inner_steps = static_cast<int>(cfg.get_int_or("meta.K", 2));
  c.meta.eta = cfg.get_double_or("meta.eta", 0.01);
  c.meta.meta_iters = static_cast<int>(cfg.get_int_or("meta.meta_iters", 50));

  c.meta.rl.alpha = cfg.get_double_or("rl.alpha", 0.02);
  c.meta.rl.entropy_coeff = cfg.get_double_or("rl.entropy_coeff", 0.01);
  c.meta.rl.trajectories_per_update =
      static_cast<int>(cfg.get_int_or("rl.trajectories_per_update", 16));
  c.meta.rl.gamma = cfg.get_double_or("rl.gamma", 1.0);

  c.gen.generation_tasks = static_cast<int>(cfg.get_int_or("gen.Q", 32));
  c.gen.per_policy = static_cast<int>(cfg.get_int_or("gen.per_policy", 64));
  c.gen.finetune_steps =
      static_cast<int>(cfg.get_int_or("gen.finetune_steps", c.meta.inner_steps));

  try {
    c.tasks.proxy_spec.arch =
        surrogate::arch_from_string(cfg.get_string_or("proxy.arch", "conv1d"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("proxy.arch: ") + e.what());
  }
  c.tasks.proxy_spec.max_length = oracle.max_length;
  c.tasks.proxy_spec.alphabet_size = oracle.alphabet.size();
  c.tasks.proxy_train.epochs =
      static_cast<int>(cfg.get_int_or("proxy.epochs", 10));
  c.tasks.proxy_train.learning_rate =
      cfg.get_double_or("proxy.learning_rate", 1e-3);
  c.tasks.proxy_train.minibatch =
      static_cast<int>(cfg.get_int_or("proxy.minibatch", 50));
  c.tasks.p = cfg.get_double_or("proxy.p", 1.0);

  c.tasks.lambda = cfg.get_double_or("tasks.lambda", 0.0);
  c.tasks.epsilon = cfg.get_double_or("tasks.epsilon", 2.0);
  try {
    c.tasks.distance = metarl::distance_kind_from_string(
        cfg.get_string_or("tasks.distance",
                          oracle.fixed_length() ? "hamming" : "edit"));
    c.tasks.weighting = metarl::dens_weighting_from_string(
        cfg.get_string_or("tasks.weighting", "linear"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("tasks: ") + e.what());
  }
  return c;
}

double median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2]
                    : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::string hash_hex(std::uint64_t h) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace

ExperimentConfig load_experiment_config(const Config& cfg) {
  ExperimentConfig ec;
  ec.raw = cfg;
  ec.method = method_from_string(cfg.get_string("experiment.method"));
  ec.task_label = cfg.get_string_or("experiment.task", "task");
  ec.seeds = static_cast<int>(cfg.get_int_or("experiment.seeds", 3));
  if (ec.seeds < 1) throw ConfigError("experiment.seeds: must be >= 1");
  ec.base_seed = cfg.get_u64_or("experiment.master_seed", 1);
  ec.out_root = cfg.get_string_or("experiment.out", "runs");

  const auto oracle = load_oracle_spec(cfg);
  ec.campaign = load_campaign_config(cfg, oracle);

  if (ec.method == Method::policy_ensemble) {
    ec.campaign.gen.from_scratch = true;
    ec.campaign.gen.generation_tasks = static_cast<int>(cfg.get_int_or("gen.Q", 8));
    ec.campaign.gen.per_policy =
        static_cast<int>(cfg.get_int_or("gen.per_policy", 256));
    ec.campaign.gen.finetune_steps =
        static_cast<int>(cfg.get_int_or("gen.scratch_steps", 20));
  }

  if (ec.method == Method::random || ec.method == Method::genetic) {
    ec.baseline.kind = ec.method == Method::random
                           ? BaselineKind::random_mutation
                           : BaselineKind::genetic;
    ec.baseline.mutation_rate = cfg.get_double_or(
        "baseline.mutation_rate",
        ec.baseline.kind == BaselineKind::random_mutation ? 0.05 : 1.0);
    ec.baseline.population =
        static_cast<int>(cfg.get_int_or("baseline.population", 100));
    ec.baseline.recombination_rate =
        cfg.get_double_or("baseline.recombination_rate", 0.5);
    try {
      ec.baseline.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("baseline: ") + e.what());
    }
  }
  return ec;
}

std::vector<AggregateRow> aggregate_records(
    const std::vector<SeedOutcome>& outcomes) {
  std::size_t max_rounds = 0;
  for (const auto& o : outcomes) {
    if (!o.failed) max_rounds = std::max(max_rounds, o.records.size());
  }
  std::vector<AggregateRow> rows;
  for (std::size_t r = 0; r < max_rounds; ++r) {
    std::vector<double> values;
    for (const auto& o : outcomes) {
      if (!o.failed && r < o.records.size()) {
        values.push_back(o.records[r].cumulative_max);
      }
    }
    if (values.empty()) continue;
    AggregateRow row;
    row.round = static_cast<int>(r);
    row.seeds = static_cast<int>(values.size());
    row.cum_max_min = *std::min_element(values.begin(), values.end());
    row.cum_max_max = *std::max_element(values.begin(), values.end());
    row.cum_max_median = median(values);
    rows.push_back(row);
  }
  return rows;
}

ExperimentReport run_experiment(const std::string& config_path,
                                const std::string& out_root_override) {
  return run_experiment_config(Config::from_file(config_path),
                               out_root_override);
}

ExperimentReport run_experiment_config(const Config& cfg,
                                       const std::string& out_root_override) {
  ExperimentReport report;
  report.config = load_experiment_config(cfg);
  auto& ec = report.config;
  if (!out_root_override.empty()) ec.out_root = out_root_override;

  const std::string tag = hash_hex(cfg.hash());
  const fs::path exp_dir = fs::path(ec.out_root) / tag;
  fs::create_directories(exp_dir);
  report.experiment_dir = exp_dir.string();
  {
    std::ofstream echo(exp_dir / "config_echo.txt");
    echo << cfg.canonical();
  }

  for (int i = 0; i < ec.seeds; ++i) {
    SeedOutcome outcome;
    outcome.master_seed =
        derive_seed(ec.base_seed, "experiment_seed", static_cast<std::uint64_t>(i));
    const fs::path run_dir = exp_dir / (tag + "-s" + std::to_string(i));
    outcome.run_dir = run_dir.string();
    try {
      if (ec.method == Method::random || ec.method == Method::genetic) {
        BaselineCampaignConfig bc;
        bc.rounds = ec.campaign.rounds;
        bc.batch_size = ec.campaign.batch_size;
        bc.initial_batch_size = ec.campaign.initial_batch_size;
        bc.baseline = ec.baseline;
        bc.oracle = ec.campaign.oracle;
        bc.master_seed = outcome.master_seed;
        bc.deterministic_output = ec.campaign.deterministic_output;
        bc.out_dir = run_dir.string();
        outcome.records = run_baseline_campaign(bc).records;
      } else {
        bo::CampaignConfig cc = ec.campaign;
        cc.master_seed = outcome.master_seed;
        cc.out_dir = run_dir.string();
        outcome.records = bo::run_campaign(cc).records;
      }
    } catch (const std::exception& e) {
      outcome.failed = true;
      outcome.error = e.what();
    }
    report.outcomes.push_back(std::move(outcome));
  }

  report.aggregate = aggregate_records(report.outcomes);
  if (!report.aggregate.empty()) {
    report.final_median_cum_max = report.aggregate.back().cum_max_median;
  }

  {
    std::ofstream out(exp_dir / "aggregate.csv");
    out << "# config=" << tag << " method=" << to_string(ec.method)
        << " task=" << ec.task_label << "\n";
    out << "round,seeds,cum_max_min,cum_max_median,cum_max_max\n";
    char buf[160];
    for (const auto& row : report.aggregate) {
      std::snprintf(buf, sizeof buf, "%d,%d,%.12g,%.12g,%.12g\n", row.round,
                    row.seeds, row.cum_max_min, row.cum_max_median,
                    row.cum_max_max);
      out << buf;
    }
  }

  {
    std::ofstream out(exp_dir / "summary.csv");
    out << "method,task,seeds,final_median_cum_max,source\n";
    char buf[200];
    std::snprintf(buf, sizeof buf, "%s,%s,%d,%.12g,this_run\n",
                  to_string(ec.method).c_str(), ec.task_label.c_str(),
                  ec.seeds, report.final_median_cum_max);
    out << buf;
    const auto& oracle = ec.campaign.oracle;
    if (oracle.kind == oracles::OracleKind::ising_alternating &&
        oracle.max_length == 20) {
      // Published comparison values for the length-20 alternating-chain task.
      out << "single_mutant_ucb," << ec.task_label << ",,14.67,paper\n";
      out << "regularized_evol_ucb," << ec.task_label << ",,14.67,paper\n";
      out << "bo_single_mutant_ucb," << ec.task_label << ",,15.33,paper\n";
      out << "bo_regularized_evol_ucb," << ec.task_label << ",,16.67,paper\n";
      out << "bo_des_ucb," << ec.task_label << ",,16.67,paper\n";
      out << "metarlbo_ucb," << ec.task_label << ",,18.00,paper\n";
      out << "metarlbo_posterior_mean," << ec.task_label << ",,17.00,paper\n";
    }
    for (const auto& o : report.outcomes) {
      if (o.failed) {
        out << "# seed failure: " << o.run_dir << ": " << o.error << "\n";
      }
    }
  }
  return report;
}

UncertaintyAnalysis analyze_uncertainty(const std::string& run_dir,
                                        int round_n, int ensemble_size,
                                        double subsample_p) {
  const fs::path dir(run_dir);
  const auto dataset_path = dir / "dataset.tsv";
  if (!fs::exists(dataset_path)) {
    throw std::runtime_error("no dataset.tsv under " + run_dir);
  }
  const auto data = seqcore::Dataset::load(dataset_path.string());

  seqcore::Dataset train(data.alphabet());
  std::vector<seqcore::ScoredSequence> test;
  int max_round_seen = 0;
  std::size_t max_len = 0;
  for (const auto& e : data.entries()) {
    max_round_seen = std::max(max_round_seen, e.round);
    max_len = std::max(max_len, e.seq.size());
    if (e.round <= round_n) {
      train.insert(e.seq, e.score, e.round);
    } else if (e.round == round_n + 1) {
      test.push_back(e);
    }
  }
  if (train.empty() || test.empty()) {
    throw std::runtime_error(
        "run has no data for rounds <= " + std::to_string(round_n) +
        " and round " + std::to_string(round_n + 1) + " (max round " +
        std::to_string(max_round_seen) + ")");
  }

  int max_length = static_cast<int>(max_len);
  const auto manifest_path = dir / "manifest.json";
  if (fs::exists(manifest_path)) {
    std::ifstream in(manifest_path);
    nlohmann::json manifest;
    in >> manifest;
    if (manifest.contains("config") &&
        manifest["config"].contains("max_length")) {
      max_length = manifest["config"]["max_length"].get<int>();
    }
  }

  surrogate::TrainConfig tc;
  const std::vector<double> levels{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};

  UncertaintyAnalysis analysis;
  for (const auto arch : {surrogate::Arch::mlp, surrogate::Arch::conv1d}) {
    surrogate::RegressorSpec spec;
    spec.arch = arch;
    spec.max_length = max_length;
    spec.alphabet_size = data.alphabet().size();
    const auto ensemble = surrogate::build_ensemble(
        spec, train, ensemble_size, subsample_p, tc,
        derive_seed(0xA11CE, "analysis", static_cast<std::uint64_t>(round_n),
                    arch == surrogate::Arch::mlp ? 0 : 1));
    const auto curve = surrogate::calibration_curve(ensemble, test, levels);
    const auto nll = surrogate::ensemble_nll(ensemble, test);

    const std::string arch_name = surrogate::to_string(arch);
    {
      std::ofstream out(dir / ("calibration_" + arch_name + "_round_" +
                               std::to_string(round_n) + ".csv"));
      out << "expected,observed\n";
      char buf[80];
      for (const auto& p : curve) {
        std::snprintf(buf, sizeof buf, "%.4f,%.6f\n", p.expected, p.observed);
        out << buf;
      }
    }
    {
      auto sorted = nll;
      std::sort(sorted.begin(), sorted.end());
      const auto q = [&](double f) {
        return sorted[static_cast<std::size_t>(
            f * static_cast<double>(sorted.size() - 1))];
      };
      std::ofstream out(dir / ("nll_" + arch_name + "_round_" +
                               std::to_string(round_n) + ".csv"));
      char buf[160];
      std::snprintf(buf, sizeof buf, "# q1=%.6g median=%.6g q3=%.6g n=%zu\n",
                    q(0.25), q(0.5), q(0.75), sorted.size());
      out << buf << "nll\n";
      for (double v : nll) {
        std::snprintf(buf, sizeof buf, "%.10g\n", v);
        out << buf;
      }
    }
    if (arch == surrogate::Arch::mlp) {
      analysis.calibration_mlp = curve;
      analysis.nll_mlp = nll;
    } else {
      analysis.calibration_conv = curve;
      analysis.nll_conv = nll;
    }
  }
  return analysis;
}

void write_plot_data(const std::string& experiment_dir) {
  std::vector<SeedOutcome> outcomes;
  for (const auto& entry : fs::directory_iterator(experiment_dir)) {
    if (!entry.is_directory()) continue;
    const auto csv = entry.path() / "rounds.csv";
    if (!fs::exists(csv)) continue;
    SeedOutcome outcome;
    outcome.run_dir = entry.path().string();
    std::ifstream in(csv);
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      bo::RoundRecord rec;
      std::istringstream ss(line);
      std::string field;
      std::getline(ss, field, ',');
      rec.round = std::stoi(field);
      std::getline(ss, field, ',');
      rec.total_queries = std::stoll(field);
      std::getline(ss, field, ',');
      rec.batch_max = std::stod(field);
      std::getline(ss, field, ',');
      rec.batch_mean = std::stod(field);
      std::getline(ss, field, ',');
      rec.cumulative_max = std::stod(field);
      outcome.records.push_back(rec);
    }
    if (!outcome.records.empty()) outcomes.push_back(std::move(outcome));
  }
  if (outcomes.empty()) {
    throw std::runtime_error("no per-seed rounds.csv files under " +
                             experiment_dir);
  }
  std::sort(outcomes.begin(), outcomes.end(),
            [](const SeedOutcome& a, const SeedOutcome& b) {
              return a.run_dir < b.run_dir;
            });
  const auto rows = aggregate_records(outcomes);
  std::ofstream out(fs::path(experiment_dir) / "aggregate.csv");
  out << "# regenerated by plot-data\n";
  out << "round,seeds,cum_max_min,cum_max_median,cum_max_max\n";
  char buf[160];
  for (const auto& row : rows) {
    std::snprintf(buf, sizeof buf, "%d,%d,%.12g,%.12g,%.12g\n", row.round,
                  row.seeds, row.cum_max_min, row.cum_max_median,
                  row.cum_max_max);
    out << buf;
  }
}

}  // namespace metarlbo::bench
