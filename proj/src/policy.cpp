#include "metarlbo/policy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace metarlbo::policy {

void GenEnv::validate() const {
  if (horizon < 1) throw std::invalid_argument("env horizon must be >= 1");
  if (!(gamma > 0.0 && gamma <= 1.0)) {
    throw std::invalid_argument("env gamma must be in (0, 1]");
  }
  if (!reward_fn) throw std::invalid_argument("env has no reward function");
}

double Trajectory::return_at(int t, double gamma) const {
  const int T = steps();
  return std::pow(gamma, static_cast<double>(T - 1 - t)) * terminal_reward;
}

void RLConfig::validate() const {
  if (!(alpha >= 0.0)) throw std::invalid_argument("rl alpha must be >= 0");
  if (entropy_coeff < 0.0) {
    throw std::invalid_argument("rl entropy coefficient must be >= 0");
  }
  if (trajectories_per_update < 1) {
    throw std::invalid_argument("rl trajectories per update must be >= 1");
  }
  if (!(gamma > 0.0 && gamma <= 1.0)) {
    throw std::invalid_argument("rl gamma must be in (0, 1]");
  }
}

PolicyNet::PolicyNet(int max_length, int action_count)
    : max_length_(max_length), actions_(action_count) {
  if (max_length < 1 || action_count < 2) {
    throw std::invalid_argument("policy net: bad geometry");
  }
  const int d = max_length_ * actions_;
  w1_ = layout_.add("fc1.weight", {d, kPolicyHidden});
  b1_ = layout_.add("fc1.bias", {kPolicyHidden});
  w2_ = layout_.add("fc2.weight", {kPolicyHidden, kPolicyHidden});
  b2_ = layout_.add("fc2.bias", {kPolicyHidden});
  w3_ = layout_.add("out.weight", {actions_, kPolicyHidden});
  b3_ = layout_.add("out.bias", {actions_});

  // Sinusoidal positional encoding over the full grid; rows beyond the
  // current prefix carry only this component.
  pe_.assign(static_cast<std::size_t>(d), 0.0);
  for (int pos = 0; pos < max_length_; ++pos) {
    for (int i = 0; i < actions_; ++i) {
      const double exponent =
          static_cast<double>(2 * (i / 2)) / static_cast<double>(actions_);
      const double angle =
          static_cast<double>(pos) / std::pow(10000.0, exponent);
      pe_[static_cast<std::size_t>(pos) * actions_ + i] =
          (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  }
}

void PolicyNet::init_params(std::span<double> params, Rng& rng) const {
  if (params.size() != layout_.total()) {
    throw std::invalid_argument("policy init: wrong parameter count");
  }
  std::fill(params.begin(), params.end(), 0.0);
  const auto d = static_cast<std::size_t>(max_length_) *
                 static_cast<std::size_t>(actions_);
  const double s1 = 1.0 / std::sqrt(static_cast<double>(max_length_ + 1));
  for (std::size_t i = 0; i < d * kPolicyHidden; ++i) {
    params[w1_ + i] = s1 * rng.normal();
  }
  const double s2 = 1.0 / std::sqrt(static_cast<double>(kPolicyHidden));
  for (std::size_t i = 0;
       i < static_cast<std::size_t>(kPolicyHidden) * kPolicyHidden; ++i) {
    params[w2_ + i] = s2 * rng.normal();
  }
  for (std::size_t i = 0;
       i < static_cast<std::size_t>(actions_) * kPolicyHidden; ++i) {
    params[w3_ + i] = s2 * rng.normal();
  }
}

void PolicyNet::positional_encode(const Sequence& prefix,
                                  std::span<double> out) const {
  if (out.size() != pe_.size()) {
    throw std::invalid_argument("positional_encode: wrong output size");
  }
  std::copy(pe_.begin(), pe_.end(), out.begin());
  const auto len = std::min<std::size_t>(prefix.size(),
                                         static_cast<std::size_t>(max_length_));
  for (std::size_t p = 0; p < len; ++p) {
    out[p * static_cast<std::size_t>(actions_) + prefix[p]] += 1.0;
  }
}

void PolicyNet::precompute_static(std::span<const double> params,
                                  PolicyScratch& sc) const {
  sc.static1.assign(kPolicyHidden, 0.0);
  for (std::size_t col = 0; col < pe_.size(); ++col) {
    const double v = pe_[col];
    if (v == 0.0) continue;
    const double* w = params.data() + w1_ + col * kPolicyHidden;
    for (int j = 0; j < kPolicyHidden; ++j) sc.static1[j] += v * w[j];
  }
  for (int j = 0; j < kPolicyHidden; ++j) sc.static1[j] += params[b1_ + j];
  sc.static_params = params.data();
  sc.static_count = params.size();
  sc.pe_gsum.assign(kPolicyHidden, 0.0);
}

void PolicyNet::forward(std::span<const double> params, const Sequence& prefix,
                        std::span<double> logits, PolicyScratch& sc) const {
  if (sc.static_params != params.data() || sc.static_count != params.size()) {
    precompute_static(params, sc);
  }
  sc.h1.assign(sc.static1.begin(), sc.static1.end());
  const auto len = std::min<std::size_t>(prefix.size(),
                                         static_cast<std::size_t>(max_length_));
  for (std::size_t p = 0; p < len; ++p) {
    const double* w =
        params.data() + w1_ +
        (p * static_cast<std::size_t>(actions_) + prefix[p]) * kPolicyHidden;
    for (int j = 0; j < kPolicyHidden; ++j) sc.h1[j] += w[j];
  }
  nn::relu_inplace(sc.h1);
  sc.h2.resize(kPolicyHidden);
  nn::linear_forward(params.subspan(w2_), params.subspan(b2_, kPolicyHidden),
                     sc.h1, sc.h2);
  nn::relu_inplace(sc.h2);
  nn::linear_forward(params.subspan(w3_),
                     params.subspan(b3_, static_cast<std::size_t>(actions_)),
                     sc.h2, logits);
}

void PolicyNet::backward(std::span<const double> params,
                         const Sequence& prefix,
                         std::span<const double> dlogits,
                         std::span<double> grad, PolicyScratch& sc) const {
  sc.g2.assign(kPolicyHidden, 0.0);
  nn::linear_backward(params.subspan(w3_), sc.h2, dlogits, grad.subspan(w3_),
                      grad.subspan(b3_, static_cast<std::size_t>(actions_)),
                      sc.g2);
  for (int j = 0; j < kPolicyHidden; ++j) {
    if (!(sc.h2[j] > 0.0)) sc.g2[j] = 0.0;
  }
  sc.g1.assign(kPolicyHidden, 0.0);
  nn::linear_backward(params.subspan(w2_), sc.h1, sc.g2, grad.subspan(w2_),
                      grad.subspan(b2_, kPolicyHidden), sc.g1);
  for (int j = 0; j < kPolicyHidden; ++j) {
    if (!(sc.h1[j] > 0.0)) sc.g1[j] = 0.0;
  }
  for (int j = 0; j < kPolicyHidden; ++j) {
    grad[b1_ + j] += sc.g1[j];
    sc.pe_gsum[j] += sc.g1[j];
  }
  const auto len = std::min<std::size_t>(prefix.size(),
                                         static_cast<std::size_t>(max_length_));
  for (std::size_t p = 0; p < len; ++p) {
    double* row =
        grad.data() + w1_ +
        (p * static_cast<std::size_t>(actions_) + prefix[p]) * kPolicyHidden;
    for (int j = 0; j < kPolicyHidden; ++j) row[j] += sc.g1[j];
  }
}

void PolicyNet::flush_backward(std::span<double> grad,
                               PolicyScratch& sc) const {
  for (std::size_t col = 0; col < pe_.size(); ++col) {
    const double v = pe_[col];
    if (v == 0.0) continue;
    double* row = grad.data() + w1_ + col * kPolicyHidden;
    for (int j = 0; j < kPolicyHidden; ++j) row[j] += v * sc.pe_gsum[j];
  }
  std::fill(sc.pe_gsum.begin(), sc.pe_gsum.end(), 0.0);
}

void action_distribution(std::span<const double> logits, bool mask_eos,
                         int eos_action, std::span<double> probs) {
  double max_logit = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (mask_eos && static_cast<int>(i) == eos_action) continue;
    if (!std::isfinite(logits[i])) {
      throw std::runtime_error("policy produced non-finite logits");
    }
    max_logit = std::max(max_logit, logits[i]);
  }
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (mask_eos && static_cast<int>(i) == eos_action) {
      probs[i] = 0.0;
      continue;
    }
    probs[i] = std::exp(logits[i] - max_logit);
    total += probs[i];
  }
  for (std::size_t i = 0; i < probs.size(); ++i) probs[i] /= total;
}

namespace {

int sample_from(std::span<const double> probs, Rng& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  int last = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    acc += probs[i];
    last = static_cast<int>(i);
    if (u < acc) return last;
  }
  return last;
}

// Shared rollout core; reward evaluation is optional.
template <typename OnDone>
void roll(std::span<const double> params, const PolicyNet& net,
          const GenEnv& env, int n, Rng& rng, OnDone&& on_done) {
  env.validate();
  if (n < 1) throw std::invalid_argument("rollout count must be >= 1");
  if (net.action_count() != env.action_count() ||
      net.max_length() != env.horizon) {
    throw std::invalid_argument("policy net does not match env geometry");
  }
  PolicyScratch sc;
  net.precompute_static(params, sc);
  std::vector<double> logits(static_cast<std::size_t>(net.action_count()));
  std::vector<double> probs(logits.size());
  for (int i = 0; i < n; ++i) {
    Trajectory traj;
    for (int step = 0; step < env.horizon; ++step) {
      net.forward(params, traj.sequence, logits, sc);
      const bool mask_eos = env.variable_length && step == 0;
      action_distribution(logits, mask_eos, env.eos_action(), probs);
      const int action = sample_from(probs, rng);
      traj.actions.push_back(static_cast<std::uint8_t>(action));
      if (env.variable_length && action == env.eos_action()) break;
      traj.sequence.push_back(static_cast<std::uint8_t>(action));
    }
    on_done(std::move(traj), i);
  }
}

}  // namespace

std::vector<Trajectory> sample_trajectories(std::span<const double> params,
                                            const PolicyNet& net,
                                            const GenEnv& env, int n,
                                            Rng& rng) {
  std::vector<Trajectory> out;
  out.reserve(static_cast<std::size_t>(n));
  roll(params, net, env, n, rng, [&](Trajectory traj, int idx) {
    try {
      traj.terminal_reward = env.reward_fn(traj.sequence);
    } catch (const std::exception& e) {
      throw std::runtime_error("reward evaluation failed for trajectory " +
                               std::to_string(idx) + ": " + e.what());
    }
    if (!std::isfinite(traj.terminal_reward)) {
      throw std::runtime_error("non-finite reward for trajectory " +
                               std::to_string(idx));
    }
    out.push_back(std::move(traj));
  });
  return out;
}

std::vector<Sequence> sample_sequences(std::span<const double> params,
                                       const PolicyNet& net, const GenEnv& env,
                                       int n, Rng& rng) {
  std::vector<Sequence> out;
  out.reserve(static_cast<std::size_t>(n));
  roll(params, net, env, n, rng,
       [&](Trajectory traj, int) { out.push_back(std::move(traj.sequence)); });
  return out;
}

LossGrad reinforce_loss(std::span<const double> params, const PolicyNet& net,
                        std::span<const Trajectory> trajectories,
                        double entropy_coeff, double gamma,
                        bool variable_length) {
  if (trajectories.empty()) {
    throw std::invalid_argument("reinforce_loss: no trajectories");
  }
  LossGrad result;
  result.grad.assign(net.param_count(), 0.0);

  PolicyScratch sc;
  net.precompute_static(params, sc);
  const auto actions = static_cast<std::size_t>(net.action_count());
  const int eos = net.action_count() - 1;  // meaningful only if variable
  std::vector<double> logits(actions), probs(actions), dlogits(actions);
  const double inv_n = 1.0 / static_cast<double>(trajectories.size());

  for (const auto& traj : trajectories) {
    const int T = traj.steps();
    if (T == 0) throw std::invalid_argument("empty trajectory");
    const double inv_t = 1.0 / static_cast<double>(T);
    Sequence prefix;
    prefix.tokens.reserve(traj.sequence.size());
    for (int t = 0; t < T; ++t) {
      net.forward(params, prefix, logits, sc);
      const bool mask_eos = variable_length && t == 0;
      action_distribution(logits, mask_eos, eos, probs);
      const int a = traj.actions[static_cast<std::size_t>(t)];
      const double g = traj.return_at(t, gamma);

      double entropy = 0.0;
      for (std::size_t j = 0; j < actions; ++j) {
        if (probs[j] > 0.0) entropy -= probs[j] * std::log(probs[j]);
      }
      const double log_pa = std::log(probs[static_cast<std::size_t>(a)]);
      result.loss -= inv_n * inv_t * (g * log_pa + entropy_coeff * entropy);

      const double scale = -inv_n * inv_t;
      for (std::size_t j = 0; j < actions; ++j) {
        if (probs[j] <= 0.0) {
          dlogits[j] = 0.0;
          continue;
        }
        const double indicator = static_cast<int>(j) == a ? 1.0 : 0.0;
        const double dh = -probs[j] * (std::log(probs[j]) + entropy);
        dlogits[j] =
            scale * (g * (indicator - probs[j]) + entropy_coeff * dh);
      }
      net.backward(params, prefix, dlogits, result.grad, sc);
      if (!(variable_length && a == eos)) {
        prefix.push_back(static_cast<std::uint8_t>(a));
      }
    }
  }
  net.flush_backward(result.grad, sc);
  if (!std::isfinite(result.loss)) {
    throw std::runtime_error("reinforce_loss: non-finite loss");
  }
  return result;
}

std::vector<double> inner_update(std::span<const double> params,
                                 const PolicyNet& net, const GenEnv& env,
                                 const RLConfig& cfg, Rng& rng) {
  cfg.validate();
  const auto trajectories = sample_trajectories(
      params, net, env, cfg.trajectories_per_update, rng);
  const LossGrad lg = reinforce_loss(params, net, trajectories,
                                     cfg.entropy_coeff, env.gamma,
                                     env.variable_length);
  std::vector<double> updated(params.begin(), params.end());
  for (std::size_t i = 0; i < updated.size(); ++i) {
    updated[i] -= cfg.alpha * lg.grad[i];
  }
  return updated;
}

}  // namespace metarlbo::policy
