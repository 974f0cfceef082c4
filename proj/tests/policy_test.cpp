#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "metarlbo/policy.hpp"
#include "metarlbo/rng.hpp"

using namespace metarlbo;
using namespace metarlbo::policy;
using seqcore::Alphabet;
using seqcore::Sequence;

namespace {

GenEnv bandit_env(int arms, double (*reward)(const Sequence&)) {
  GenEnv env;
  env.alphabet = Alphabet(std::string("ABCDEFGH").substr(0, arms));
  env.horizon = 1;
  env.variable_length = false;
  env.gamma = 1.0;
  env.reward_fn = reward;
  return env;
}

double arm0_reward(const Sequence& s) { return s[0] == 0 ? 1.0 : 0.0; }
double zero_reward(const Sequence&) { return 0.0; }

std::vector<double> policy_probs(const PolicyNet& net,
                                 std::span<const double> params,
                                 const Sequence& prefix, bool mask_eos) {
  PolicyScratch sc;
  std::vector<double> logits(net.action_count()), probs(net.action_count());
  net.forward(params, prefix, logits, sc);
  action_distribution(logits, mask_eos, net.action_count() - 1, probs);
  return probs;
}

double relative_error(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

}  // namespace

TEST_CASE("positional encoding closed forms") {
  const PolicyNet net(5, 4);
  std::vector<double> empty(net.input_dim());
  net.positional_encode(Sequence{}, empty);

  // Row 0: sin(0)=0 at even indices, cos(0)=1 at odd indices.
  CHECK(empty[0] == 0.0);
  CHECK(empty[1] == 1.0);
  CHECK(empty[2] == 0.0);
  CHECK(empty[3] == 1.0);
  // Empty prefix leaves the pure encoding: row 1 entry 0 is sin(1).
  CHECK(empty[4] == doctest::Approx(std::sin(1.0)));

  Sequence p1;
  p1.tokens = {2, 0};
  Sequence p2;
  p2.tokens = {1, 0};
  std::vector<double> e1(net.input_dim()), e2(net.input_dim());
  net.positional_encode(p1, e1);
  net.positional_encode(p2, e2);
  // Same-length prefixes differ exactly in the filled rows (rows 0 and 1).
  for (std::size_t i = 0; i < e1.size(); ++i) {
    if (i >= 8) CHECK(e1[i] == e2[i]);
  }
  CHECK(e1[2] == empty[2] + 1.0);  // one-hot added on top of the encoding
  CHECK(e2[1] == empty[1] + 1.0);
}

TEST_CASE("zero parameters give a uniform policy (exact multinomial test)") {
  const PolicyNet net(2, 2);
  std::vector<double> params(net.param_count(), 0.0);
  GenEnv env;
  env.alphabet = Alphabet("AB");
  env.horizon = 2;
  env.reward_fn = zero_reward;

  Rng rng(99);
  const int n = 10000;
  std::map<std::string, int> counts;
  const auto sequences = sample_sequences(params, net, env, n, rng);
  for (const auto& s : sequences) {
    counts[seqcore::sequence_to_string(env.alphabet, s)]++;
  }
  REQUIRE(counts.size() == 4);
  const double sigma3 = 3.0 * std::sqrt(n * 0.25 * 0.75);
  for (const auto& [str, count] : counts) {
    CHECK(std::abs(count - n * 0.25) <= sigma3);
  }
}

TEST_CASE("saturated EOS logit forces length-1 sequences") {
  const PolicyNet net(6, 4);  // 3 symbols + EOS
  std::vector<double> params(net.param_count(), 0.0);
  std::size_t out_bias = 0;
  for (const auto& t : net.layout().tensors()) {
    if (t.name == "out.bias") out_bias = t.offset;
  }
  params[out_bias + 3] = 50.0;  // EOS action

  GenEnv env;
  env.alphabet = Alphabet("ABC");
  env.horizon = 6;
  env.variable_length = true;
  env.reward_fn = zero_reward;

  Rng rng(5);
  const auto sequences = sample_sequences(params, net, env, 200, rng);
  for (const auto& s : sequences) CHECK(s.size() == 1);  // EOS masked at step 0
}

TEST_CASE("rollouts are reproducible under a fixed seed") {
  const PolicyNet net(5, 3);
  std::vector<double> params(net.param_count());
  Rng init(3);
  net.init_params(params, init);
  GenEnv env;
  env.alphabet = Alphabet("ABC");
  env.horizon = 5;
  env.reward_fn = zero_reward;

  Rng r1(77), r2(77);
  const auto t1 = sample_trajectories(params, net, env, 20, r1);
  const auto t2 = sample_trajectories(params, net, env, 20, r2);
  REQUIRE(t1.size() == t2.size());
  for (std::size_t i = 0; i < t1.size(); ++i) {
    CHECK(t1[i].sequence == t2[i].sequence);
    CHECK(t1[i].terminal_reward == t2[i].terminal_reward);
  }
}

TEST_CASE("returns follow the sparse terminal reward") {
  Trajectory traj;
  traj.actions = {0, 1, 0, 1};
  traj.terminal_reward = 2.0;
  const double gamma = 0.9;
  for (int t = 0; t < 4; ++t) {
    CHECK(traj.return_at(t, gamma) ==
          doctest::Approx(std::pow(gamma, 3 - t) * 2.0));
  }
  CHECK(traj.return_at(3, 1.0) == 2.0);
}

TEST_CASE("softmax is invariant to constant logit shifts") {
  const PolicyNet net(4, 5);
  std::vector<double> params(net.param_count());
  Rng init(9);
  net.init_params(params, init);

  auto shifted = params;
  std::size_t out_bias = 0;
  for (const auto& t : net.layout().tensors()) {
    if (t.name == "out.bias") out_bias = t.offset;
  }
  for (int j = 0; j < 5; ++j) shifted[out_bias + j] += 13.5;

  Sequence prefix;
  prefix.tokens = {1, 3};
  const auto p1 = policy_probs(net, params, prefix, false);
  const auto p2 = policy_probs(net, shifted, prefix, false);
  for (std::size_t i = 0; i < p1.size(); ++i) {
    CHECK(std::abs(p1[i] - p2[i]) <= 1e-12);
  }
}

TEST_CASE("reinforce loss: zero returns and zero entropy give a zero gradient") {
  const PolicyNet net(4, 3);
  std::vector<double> params(net.param_count());
  Rng init(2);
  net.init_params(params, init);
  GenEnv env;
  env.alphabet = Alphabet("ABC");
  env.horizon = 4;
  env.reward_fn = zero_reward;

  Rng rng(1);
  const auto trajs = sample_trajectories(params, net, env, 8, rng);
  const auto lg = reinforce_loss(params, net, trajs, 0.0, 1.0);
  CHECK(lg.loss == 0.0);
  for (double g : lg.grad) CHECK(g == 0.0);
}

TEST_CASE("reinforce gradient matches finite differences") {
  const PolicyNet net(4, 4);  // variable length: 3 symbols + EOS
  std::vector<double> params(net.param_count());
  Rng init(8);
  net.init_params(params, init);

  GenEnv env;
  env.alphabet = Alphabet("ABC");
  env.horizon = 4;
  env.variable_length = true;
  env.gamma = 0.95;
  env.reward_fn = [](const Sequence& s) {
    return static_cast<double>(s.size()) * 0.5 + (s[0] == 1 ? 1.0 : 0.0);
  };

  Rng rng(4);
  const auto trajs = sample_trajectories(params, net, env, 6, rng);
  const double c_h = 0.07;
  const auto lg = reinforce_loss(params, net, trajs, c_h, env.gamma, true);

  auto loss_at = [&](const std::vector<double>& p) {
    return reinforce_loss(p, net, trajs, c_h, env.gamma, true).loss;
  };

  Rng pick(123);
  int checked = 0;
  std::vector<double> probe = params;
  for (int trial = 0; trial < 20000 && checked < 110; ++trial) {
    const auto i = pick.uniform_int(params.size());
    const double h = 1e-6 * std::max(1.0, std::abs(params[i]));
    probe[i] = params[i] + h;
    const double up = loss_at(probe);
    probe[i] = params[i] - h;
    const double down = loss_at(probe);
    probe[i] = params[i];
    const double fd = (up - down) / (2.0 * h);
    if (std::abs(fd) < 1e-10 && std::abs(lg.grad[i]) < 1e-10) continue;
    CHECK(relative_error(lg.grad[i], fd) <= 1e-4);
    ++checked;
  }
  CHECK(checked >= 100);
}

TEST_CASE("two-armed bandit: repeated updates concentrate on the good arm") {
  const PolicyNet net(1, 2);
  std::vector<double> params(net.param_count());
  Rng init(6);
  net.init_params(params, init);
  const GenEnv env = bandit_env(2, arm0_reward);

  RLConfig cfg;
  cfg.alpha = 0.1;
  cfg.entropy_coeff = 0.01;
  cfg.trajectories_per_update = 16;
  Rng rng(11);
  for (int step = 0; step < 500; ++step) {
    params = inner_update(params, net, env, cfg, rng);
  }
  const auto probs = policy_probs(net, params, Sequence{}, false);
  CHECK(probs[0] > 0.95);
}

TEST_CASE("inner update: alpha=0 leaves parameters unchanged") {
  const PolicyNet net(3, 3);
  std::vector<double> params(net.param_count());
  Rng init(14);
  net.init_params(params, init);
  GenEnv env;
  env.alphabet = Alphabet("ABC");
  env.horizon = 3;
  env.reward_fn = arm0_reward;

  RLConfig cfg;
  cfg.alpha = 0.0;
  Rng rng(3);
  const auto next = inner_update(params, net, env, cfg, rng);
  CHECK(next == params);
}

TEST_CASE("inner update improves the bandit in expectation (sign test)") {
  const PolicyNet net(1, 2);
  const GenEnv env = bandit_env(2, arm0_reward);
  RLConfig cfg;
  cfg.alpha = 0.05;
  cfg.entropy_coeff = 0.0;
  cfg.trajectories_per_update = 32;

  int wins = 0, losses = 0;
  for (int seed = 0; seed < 100; ++seed) {
    std::vector<double> params(net.param_count());
    Rng init(static_cast<std::uint64_t>(seed) + 1000);
    net.init_params(params, init);
    const double before = policy_probs(net, params, Sequence{}, false)[0];
    Rng rng(static_cast<std::uint64_t>(seed));
    const auto after_params = inner_update(params, net, env, cfg, rng);
    const double after = policy_probs(net, after_params, Sequence{}, false)[0];
    if (after > before) ++wins;
    if (after < before) ++losses;
  }
  // One-sided sign test at p < 0.01 for n = 100: at least 63 wins.
  CHECK(wins >= 63);
  CHECK(wins > losses);
}

TEST_CASE("entropy bonus drives the policy toward uniform monotonically") {
  const PolicyNet net(1, 3);
  std::vector<double> params(net.param_count());
  Rng init(21);
  net.init_params(params, init);
  // Tilt the policy away from uniform first.
  std::size_t out_bias = 0;
  for (const auto& t : net.layout().tensors()) {
    if (t.name == "out.bias") out_bias = t.offset;
  }
  params[out_bias] += 1.5;

  GenEnv env = bandit_env(3, zero_reward);
  RLConfig cfg;
  cfg.alpha = 0.05;
  cfg.entropy_coeff = 1.0;
  cfg.trajectories_per_update = 4;

  auto kl_to_uniform = [&](const std::vector<double>& p) {
    const auto probs = policy_probs(net, p, Sequence{}, false);
    double kl = 0.0;
    for (double q : probs) {
      if (q > 0.0) kl += q * std::log(q * 3.0);
    }
    return kl;
  };

  Rng rng(2);
  double prev = kl_to_uniform(params);
  for (int step = 0; step < 100; ++step) {
    params = inner_update(params, net, env, cfg, rng);
    const double cur = kl_to_uniform(params);
    CHECK(cur <= prev + 1e-12);
    prev = cur;
  }
  CHECK(prev < 1e-3);
}

TEST_CASE("reward failures carry trajectory context") {
  const PolicyNet net(2, 2);
  std::vector<double> params(net.param_count(), 0.0);
  GenEnv env;
  env.alphabet = Alphabet("AB");
  env.horizon = 2;
  env.reward_fn = [](const Sequence&) -> double {
    throw std::runtime_error("proxy exploded");
  };
  Rng rng(1);
  CHECK_THROWS_WITH_AS(sample_trajectories(params, net, env, 3, rng),
                       doctest::Contains("trajectory"), std::runtime_error);
}
