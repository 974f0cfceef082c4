#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "metarlbo/nn.hpp"
#include "metarlbo/rng.hpp"
#include "metarlbo/sequence.hpp"

namespace metarlbo::policy {

using seqcore::Alphabet;
using seqcore::Sequence;

// Sequence-construction episode: deterministic append transitions, reward 0
// everywhere except the terminal step, where reward_fn scores the finished
// body. Variable-length environments expose an extra EOS action (index
// alphabet.size()), masked at step 0 so bodies have length >= 1.
struct GenEnv {
  Alphabet alphabet;
  int horizon = 0;
  bool variable_length = false;
  double gamma = 1.0;
  std::function<double(const Sequence&)> reward_fn;

  int action_count() const {
    return alphabet.size() + (variable_length ? 1 : 0);
  }
  int eos_action() const { return alphabet.size(); }
  void validate() const;
};

struct Trajectory {
  Sequence sequence;                  // finished body, EOS never included
  std::vector<std::uint8_t> actions;  // generation steps; EOS only as last
  double terminal_reward = 0.0;

  int steps() const { return static_cast<int>(actions.size()); }
  // G_t for the sparse terminal reward.
  double return_at(int t, double gamma) const;
};

struct RLConfig {
  double alpha = 0.02;
  double entropy_coeff = 0.01;
  int trajectories_per_update = 16;
  double gamma = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct PolicyScratch {
  std::vector<double> static1;  // fc1 response to the positional encoding
  const double* static_params = nullptr;
  std::size_t static_count = 0;
  std::vector<double> h1, h2, logits, probs, g1, g2;
  std::vector<double> pe_gsum;  // pending rank-1 fc1 gradient (PE columns)
};

// Feedforward softmax policy over flattened one-hot prefixes with sinusoidal
// positional encoding, two ReLU layers of width 128, and one logit per
// action.
class PolicyNet {
 public:
  PolicyNet(int max_length, int action_count);

  int max_length() const { return max_length_; }
  int action_count() const { return actions_; }
  std::size_t input_dim() const { return pe_.size(); }
  const nn::ParamLayout& layout() const { return layout_; }
  std::size_t param_count() const { return layout_.total(); }
  const std::vector<double>& positional_encoding() const { return pe_; }

  void init_params(std::span<double> params, Rng& rng) const;

  // One-hot grid of the prefix (unfilled rows zero) plus the positional
  // encoding, flattened row-major.
  void positional_encode(const Sequence& prefix, std::span<double> out) const;

  // The fc1 response to the constant positional-encoding component is cached
  // in the scratch and reused by every forward at these parameters.
  void precompute_static(std::span<const double> params,
                         PolicyScratch& sc) const;
  void forward(std::span<const double> params, const Sequence& prefix,
               std::span<double> logits, PolicyScratch& sc) const;

  // Accumulates dlogits through the net into grad. Requires the scratch of
  // the immediately preceding forward. The fc1 gradient contribution of the
  // positional-encoding columns is buffered in the scratch; call
  // flush_backward exactly once after the last step of an accumulation.
  void backward(std::span<const double> params, const Sequence& prefix,
                std::span<const double> dlogits, std::span<double> grad,
                PolicyScratch& sc) const;
  void flush_backward(std::span<double> grad, PolicyScratch& sc) const;

 private:
  int max_length_;
  int actions_;
  nn::ParamLayout layout_;
  std::size_t w1_ = 0, b1_ = 0, w2_ = 0, b2_ = 0, w3_ = 0, b3_ = 0;
  std::vector<double> pe_;  // flattened positional-encoding grid
};

inline constexpr int kPolicyHidden = 128;

// Softmax action distribution for one state; masked actions get probability
// exactly zero.
void action_distribution(std::span<const double> logits, bool mask_eos,
                         int eos_action, std::span<double> probs);

std::vector<Trajectory> sample_trajectories(std::span<const double> params,
                                            const PolicyNet& net,
                                            const GenEnv& env, int n,
                                            Rng& rng);

// Rollouts without reward evaluation, for the generation phase.
std::vector<Sequence> sample_sequences(std::span<const double> params,
                                       const PolicyNet& net, const GenEnv& env,
                                       int n, Rng& rng);

struct LossGrad {
  double loss = 0.0;
  std::vector<double> grad;
};

// REINFORCE surrogate loss with entropy bonus,
//   loss = -(1/N) sum_traj (1/T) sum_t [G_t log pi(a_t|s_t) + c_H H_t],
// with its exact reverse-mode gradient. Descending this loss raises expected
// return and policy entropy. variable_length must match the env the
// trajectories came from so the per-step action masks line up.
LossGrad reinforce_loss(std::span<const double> params, const PolicyNet& net,
                        std::span<const Trajectory> trajectories,
                        double entropy_coeff, double gamma,
                        bool variable_length = false);

// One REINFORCE step on freshly sampled trajectories; returns the updated
// parameter vector, leaving the input untouched.
std::vector<double> inner_update(std::span<const double> params,
                                 const PolicyNet& net, const GenEnv& env,
                                 const RLConfig& cfg, Rng& rng);

}  // namespace metarlbo::policy
