#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "metarlbo/dataset.hpp"
#include "metarlbo/nn.hpp"
#include "metarlbo/rng.hpp"
#include "metarlbo/sequence.hpp"

namespace metarlbo::surrogate {

using seqcore::Dataset;
using seqcore::ScoredSequence;
using seqcore::Sequence;

enum class Arch { mlp, conv1d };

std::string to_string(Arch arch);
Arch arch_from_string(const std::string& name);

// Fixed regressor geometries over right-zero-padded one-hot inputs of shape
// max_length x alphabet_size:
//   mlp    - dense ReLU stack with hidden sizes (32, 8, 4) and scalar output.
//   conv1d - 32 filters of kernel 5 over positions, ReLU, global max pool,
//            dense to a scalar.
struct RegressorSpec {
  Arch arch = Arch::conv1d;
  int max_length = 0;
  int alphabet_size = 0;

  void validate() const;
  bool operator==(const RegressorSpec&) const = default;
};

struct TrainConfig {
  int epochs = 10;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int minibatch = 50;
  std::uint64_t seed = 0;

  void validate() const;
};

// Reusable work buffers for forward/backward passes.
struct Scratch {
  std::vector<double> h1, h2, h3;  // activations (mlp) / conv z grid in h1
  std::vector<double> g1, g2, g3;  // matching gradient buffers
  std::vector<int> argmax;
};

// Stateless forward/backward for one regressor geometry. Sequence inputs are
// exactly one-hot, so both passes index weights by token instead of touching
// the zero entries of the padded grid.
class RegressorNet {
 public:
  explicit RegressorNet(RegressorSpec spec);

  const RegressorSpec& spec() const { return spec_; }
  const nn::ParamLayout& layout() const { return layout_; }
  std::size_t param_count() const { return layout_.total(); }

  void init_params(std::span<double> params, Rng& rng) const;

  double forward(std::span<const double> params, const Sequence& s,
                 Scratch& scratch) const;
  double forward(std::span<const double> params, const Sequence& s) const;

  // Accumulates gout * d(output)/d(params) into grad. Requires the scratch
  // state left by an immediately preceding forward() on the same inputs.
  void backward(std::span<const double> params, const Sequence& s, double gout,
                std::span<double> grad, Scratch& scratch) const;

 private:
  RegressorSpec spec_;
  nn::ParamLayout layout_;
  // mlp offsets
  std::size_t w1_ = 0, b1_ = 0, w2_ = 0, b2_ = 0, w3_ = 0, b3_ = 0, w4_ = 0,
              b4_ = 0;
  // conv offsets
  std::size_t cw_ = 0, cb_ = 0, ow_ = 0, ob_ = 0;
};

// Kernel width / filter count / hidden sizes shared by spec and layout code.
inline constexpr int kConvFilters = 32;
inline constexpr int kConvKernel = 5;
inline constexpr int kMlpHidden[3] = {32, 8, 4};

// Trained regressor. Targets are standardized over the training set and
// predictions mapped back to oracle units, so the few Adam epochs of the
// fixed schedule work on any score scale.
struct ProxyModel {
  RegressorSpec spec;
  std::vector<double> params;
  double target_mean = 0.0;
  double target_scale = 1.0;
  std::uint64_t train_seed = 0;
  double subsample_p = 1.0;
  double final_train_mse = 0.0;  // in oracle units

  double predict(const Sequence& s) const;
  double predict(const Sequence& s, Scratch& scratch) const;
};

// Mean-squared-error over a batch at the net's (normalized) output scale;
// accumulates the exact gradient into grad. Exposed for gradient checks.
double mse_loss_grad(const RegressorNet& net, std::span<const double> params,
                     std::span<const ScoredSequence> batch,
                     std::span<double> grad, Scratch& scratch);

// Adam on minibatch MSE for cfg.epochs passes over the shuffled data.
// Deterministic for fixed (seed, data order). Throws if the loss leaves the
// finite range, naming the epoch and minibatch.
ProxyModel train_regressor(const RegressorSpec& spec,
                           std::span<const ScoredSequence> data,
                           const TrainConfig& cfg);

struct MuSigma {
  double mu = 0.0;
  double sigma = 0.0;
};

// Ensemble of independently trained regressors. mu is the member mean and
// sigma the population standard deviation floored at sigma_floor.
class ProxyEnsemble {
 public:
  ProxyEnsemble() = default;
  explicit ProxyEnsemble(std::vector<ProxyModel> members,
                         double sigma_floor = 1e-3);

  MuSigma predict(const Sequence& s) const;
  MuSigma predict(const Sequence& s, Scratch& scratch) const;

  const std::vector<ProxyModel>& members() const { return members_; }
  double sigma_floor() const { return sigma_floor_; }

 private:
  std::vector<ProxyModel> members_;
  double sigma_floor_ = 1e-3;
};

// count members, each with an independent init stream and (when p < 1) an
// independent subsample of the dataset.
ProxyEnsemble build_ensemble(const RegressorSpec& spec, const Dataset& data,
                             int count, double p, const TrainConfig& cfg,
                             std::uint64_t seed, double sigma_floor = 1e-3);

// Anything exposing a Gaussian predictive (mu, sigma) can be analyzed.
using PredictFn = std::function<MuSigma(const Sequence&)>;

struct CalibrationPoint {
  double expected = 0.0;
  double observed = 0.0;
};

// For each confidence level c, the fraction of test points whose true score
// falls inside the central-c interval mu +- z_{(1+c)/2} sigma. A calibrated
// model traces observed == expected.
std::vector<CalibrationPoint> calibration_curve(
    const PredictFn& predict, std::span<const ScoredSequence> test,
    std::span<const double> levels);
std::vector<CalibrationPoint> calibration_curve(
    const ProxyEnsemble& ensemble, std::span<const ScoredSequence> test,
    std::span<const double> levels);

// Per-point Gaussian negative log-likelihood, unaggregated so box-plot
// statistics can be computed downstream.
std::vector<double> ensemble_nll(const PredictFn& predict,
                                 std::span<const ScoredSequence> test);
std::vector<double> ensemble_nll(const ProxyEnsemble& ensemble,
                                 std::span<const ScoredSequence> test);

// Inverse standard normal CDF.
double normal_quantile(double p);

}  // namespace metarlbo::surrogate
