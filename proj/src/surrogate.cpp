#include "metarlbo/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace metarlbo::surrogate {

std::string to_string(Arch arch) {
  return arch == Arch::mlp ? "mlp" : "conv1d";
}

Arch arch_from_string(const std::string& name) {
  if (name == "mlp") return Arch::mlp;
  if (name == "conv1d" || name == "cnn") return Arch::conv1d;
  throw std::invalid_argument("unknown regressor arch '" + name +
                              "' (expected mlp|conv1d)");
}

void RegressorSpec::validate() const {
  if (max_length < 1 || alphabet_size < 2) {
    throw std::invalid_argument("regressor spec: bad input geometry");
  }
  if (arch == Arch::conv1d && max_length < kConvKernel) {
    throw std::invalid_argument(
        "conv1d regressor needs max_length >= kernel width " +
        std::to_string(kConvKernel));
  }
}

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("train config: epochs >= 1");
  if (minibatch < 1) {
    throw std::invalid_argument("train config: minibatch >= 1");
  }
  if (!(learning_rate > 0.0)) {
    throw std::invalid_argument("train config: learning rate must be > 0");
  }
}

RegressorNet::RegressorNet(RegressorSpec spec) : spec_(spec) {
  spec_.validate();
  const int d = spec_.max_length * spec_.alphabet_size;
  if (spec_.arch == Arch::mlp) {
    // First layer stored input-major so a one-hot input addresses one
    // contiguous row of unit weights.
    w1_ = layout_.add("fc1.weight", {d, kMlpHidden[0]});
    b1_ = layout_.add("fc1.bias", {kMlpHidden[0]});
    w2_ = layout_.add("fc2.weight", {kMlpHidden[1], kMlpHidden[0]});
    b2_ = layout_.add("fc2.bias", {kMlpHidden[1]});
    w3_ = layout_.add("fc3.weight", {kMlpHidden[2], kMlpHidden[1]});
    b3_ = layout_.add("fc3.bias", {kMlpHidden[2]});
    w4_ = layout_.add("out.weight", {1, kMlpHidden[2]});
    b4_ = layout_.add("out.bias", {1});
  } else {
    cw_ = layout_.add("conv.weight",
                      {kConvKernel, spec_.alphabet_size, kConvFilters});
    cb_ = layout_.add("conv.bias", {kConvFilters});
    ow_ = layout_.add("out.weight", {1, kConvFilters});
    ob_ = layout_.add("out.bias", {1});
  }
}

void RegressorNet::init_params(std::span<double> params, Rng& rng) const {
  if (params.size() != layout_.total()) {
    throw std::invalid_argument("init_params: wrong parameter count");
  }
  std::fill(params.begin(), params.end(), 0.0);
  auto fill_normal = [&](std::size_t off, std::size_t n, double std) {
    for (std::size_t i = 0; i < n; ++i) params[off + i] = std * rng.normal();
  };
  if (spec_.arch == Arch::mlp) {
    const auto d = static_cast<std::size_t>(spec_.max_length) *
                   static_cast<std::size_t>(spec_.alphabet_size);
    // One-hot inputs activate at most max_length first-layer rows, so the
    // effective fan-in is max_length rather than the grid size.
    fill_normal(w1_, d * kMlpHidden[0],
                1.0 / std::sqrt(static_cast<double>(spec_.max_length)));
    fill_normal(w2_, static_cast<std::size_t>(kMlpHidden[1]) * kMlpHidden[0],
                1.0 / std::sqrt(static_cast<double>(kMlpHidden[0])));
    fill_normal(w3_, static_cast<std::size_t>(kMlpHidden[2]) * kMlpHidden[1],
                1.0 / std::sqrt(static_cast<double>(kMlpHidden[1])));
    fill_normal(w4_, kMlpHidden[2],
                1.0 / std::sqrt(static_cast<double>(kMlpHidden[2])));
  } else {
    const auto n = static_cast<std::size_t>(kConvKernel) *
                   static_cast<std::size_t>(spec_.alphabet_size) * kConvFilters;
    fill_normal(cw_, n, 1.0 / std::sqrt(static_cast<double>(kConvKernel)));
    // Small random conv bias: with zero bias every padding position ties at
    // exactly zero, leaving max-pool gradients dead on short sequences.
    fill_normal(cb_, kConvFilters, 0.1);
    fill_normal(ow_, kConvFilters,
                1.0 / std::sqrt(static_cast<double>(kConvFilters)));
  }
}

double RegressorNet::forward(std::span<const double> params, const Sequence& s,
                             Scratch& sc) const {
  const int a = spec_.alphabet_size;
  const auto len = std::min<std::size_t>(
      s.size(), static_cast<std::size_t>(spec_.max_length));
  if (spec_.arch == Arch::mlp) {
    sc.h1.assign(kMlpHidden[0], 0.0);
    for (std::size_t p = 0; p < len; ++p) {
      const double* row =
          params.data() + w1_ +
          (p * static_cast<std::size_t>(a) + s[p]) * kMlpHidden[0];
      for (int j = 0; j < kMlpHidden[0]; ++j) sc.h1[j] += row[j];
    }
    for (int j = 0; j < kMlpHidden[0]; ++j) sc.h1[j] += params[b1_ + j];
    nn::relu_inplace(sc.h1);

    sc.h2.resize(kMlpHidden[1]);
    nn::linear_forward(params.subspan(w2_), params.subspan(b2_, kMlpHidden[1]),
                       sc.h1, sc.h2);
    nn::relu_inplace(sc.h2);
    sc.h3.resize(kMlpHidden[2]);
    nn::linear_forward(params.subspan(w3_), params.subspan(b3_, kMlpHidden[2]),
                       sc.h2, sc.h3);
    nn::relu_inplace(sc.h3);
    double out = params[b4_];
    for (int j = 0; j < kMlpHidden[2]; ++j) {
      out += params[w4_ + j] * sc.h3[j];
    }
    return out;
  }

  // conv1d: z grid in h1 (positions x filters), pooled maxima in h2.
  const int positions = spec_.max_length - kConvKernel + 1;
  sc.h1.assign(static_cast<std::size_t>(positions) * kConvFilters, 0.0);
  for (int p = 0; p < positions; ++p) {
    double* z = sc.h1.data() + static_cast<std::size_t>(p) * kConvFilters;
    for (int f = 0; f < kConvFilters; ++f) z[f] = params[cb_ + f];
    for (int k = 0; k < kConvKernel; ++k) {
      const auto pos = static_cast<std::size_t>(p + k);
      if (pos >= len) break;
      const double* w =
          params.data() + cw_ +
          (static_cast<std::size_t>(k) * a + s[pos]) * kConvFilters;
      for (int f = 0; f < kConvFilters; ++f) z[f] += w[f];
    }
  }
  sc.h2.resize(kConvFilters);
  sc.argmax.assign(kConvFilters, 0);
  for (int f = 0; f < kConvFilters; ++f) {
    double best = sc.h1[f];
    int best_p = 0;
    for (int p = 1; p < positions; ++p) {
      const double v = sc.h1[static_cast<std::size_t>(p) * kConvFilters + f];
      if (v > best) {
        best = v;
        best_p = p;
      }
    }
    sc.h2[f] = best;
    sc.argmax[f] = best_p;
  }
  double out = params[ob_];
  for (int f = 0; f < kConvFilters; ++f) {
    if (sc.h2[f] > 0.0) out += params[ow_ + f] * sc.h2[f];
  }
  return out;
}

double RegressorNet::forward(std::span<const double> params,
                             const Sequence& s) const {
  Scratch sc;
  return forward(params, s, sc);
}

void RegressorNet::backward(std::span<const double> params, const Sequence& s,
                            double gout, std::span<double> grad,
                            Scratch& sc) const {
  const int a = spec_.alphabet_size;
  const auto len = std::min<std::size_t>(
      s.size(), static_cast<std::size_t>(spec_.max_length));
  if (spec_.arch == Arch::mlp) {
    grad[b4_] += gout;
    sc.g3.assign(kMlpHidden[2], 0.0);
    for (int j = 0; j < kMlpHidden[2]; ++j) {
      grad[w4_ + j] += gout * sc.h3[j];
      if (sc.h3[j] > 0.0) sc.g3[j] = gout * params[w4_ + j];
    }
    sc.g2.assign(kMlpHidden[1], 0.0);
    nn::linear_backward(params.subspan(w3_), sc.h2, sc.g3, grad.subspan(w3_),
                        grad.subspan(b3_, kMlpHidden[2]), sc.g2);
    for (int j = 0; j < kMlpHidden[1]; ++j) {
      if (!(sc.h2[j] > 0.0)) sc.g2[j] = 0.0;
    }
    sc.g1.assign(kMlpHidden[0], 0.0);
    nn::linear_backward(params.subspan(w2_), sc.h1, sc.g2, grad.subspan(w2_),
                        grad.subspan(b2_, kMlpHidden[1]), sc.g1);
    for (int j = 0; j < kMlpHidden[0]; ++j) {
      if (!(sc.h1[j] > 0.0)) sc.g1[j] = 0.0;
    }
    for (int j = 0; j < kMlpHidden[0]; ++j) grad[b1_ + j] += sc.g1[j];
    for (std::size_t p = 0; p < len; ++p) {
      double* row = grad.data() + w1_ +
                    (p * static_cast<std::size_t>(a) + s[p]) * kMlpHidden[0];
      for (int j = 0; j < kMlpHidden[0]; ++j) row[j] += sc.g1[j];
    }
    return;
  }

  grad[ob_] += gout;
  for (int f = 0; f < kConvFilters; ++f) {
    if (!(sc.h2[f] > 0.0)) continue;
    grad[ow_ + f] += gout * sc.h2[f];
    const double gm = gout * params[ow_ + f];
    grad[cb_ + f] += gm;
    const int p = sc.argmax[f];
    for (int k = 0; k < kConvKernel; ++k) {
      const auto pos = static_cast<std::size_t>(p + k);
      if (pos >= len) break;
      grad[cw_ + (static_cast<std::size_t>(k) * a + s[pos]) * kConvFilters +
           f] += gm;
    }
  }
}

double ProxyModel::predict(const Sequence& s, Scratch& scratch) const {
  const RegressorNet net(spec);
  return net.forward(params, s, scratch) * target_scale + target_mean;
}

double ProxyModel::predict(const Sequence& s) const {
  Scratch sc;
  return predict(s, sc);
}

double mse_loss_grad(const RegressorNet& net, std::span<const double> params,
                     std::span<const ScoredSequence> batch,
                     std::span<double> grad, Scratch& scratch) {
  if (batch.empty()) throw std::invalid_argument("mse_loss_grad: empty batch");
  const double inv = 1.0 / static_cast<double>(batch.size());
  double loss = 0.0;
  for (const auto& item : batch) {
    const double pred = net.forward(params, item.seq, scratch);
    const double r = pred - item.score;
    loss += r * r * inv;
    net.backward(params, item.seq, 2.0 * r * inv, grad, scratch);
  }
  return loss;
}

ProxyModel train_regressor(const RegressorSpec& spec,
                           std::span<const ScoredSequence> data,
                           const TrainConfig& cfg) {
  spec.validate();
  cfg.validate();
  if (data.empty()) {
    throw std::invalid_argument("train_regressor: empty training set");
  }

  double mean = 0.0;
  for (const auto& e : data) mean += e.score;
  mean /= static_cast<double>(data.size());
  double var = 0.0;
  for (const auto& e : data) {
    var += (e.score - mean) * (e.score - mean);
  }
  var /= static_cast<double>(data.size());
  const double scale = std::max(std::sqrt(var), 1e-8);

  std::vector<ScoredSequence> work(data.begin(), data.end());
  for (auto& e : work) e.score = (e.score - mean) / scale;

  const RegressorNet net(spec);
  ProxyModel model;
  model.spec = spec;
  model.target_mean = mean;
  model.target_scale = scale;
  model.train_seed = cfg.seed;
  model.params.resize(net.param_count());

  Rng init_rng(derive_seed(cfg.seed, "regressor_init"));
  net.init_params(model.params, init_rng);

  Rng shuffle_rng(derive_seed(cfg.seed, "regressor_shuffle"));
  nn::AdamState adam(net.param_count());
  std::vector<double> grad(net.param_count());
  Scratch scratch;

  const auto n = work.size();
  const auto mb = static_cast<std::size_t>(cfg.minibatch);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = 0; i + 1 < n; ++i) {
      const std::size_t j = i + shuffle_rng.uniform_int(n - i);
      std::swap(work[i], work[j]);
    }
    for (std::size_t start = 0, batch_idx = 0; start < n;
         start += mb, ++batch_idx) {
      const auto count = std::min(mb, n - start);
      std::fill(grad.begin(), grad.end(), 0.0);
      const double loss = mse_loss_grad(
          net, model.params,
          std::span<const ScoredSequence>(work.data() + start, count), grad,
          scratch);
      if (!std::isfinite(loss)) {
        throw std::runtime_error(
            "train_regressor: non-finite loss at epoch " +
            std::to_string(epoch) + ", minibatch " + std::to_string(batch_idx));
      }
      nn::adam_step(model.params, grad, adam, cfg.learning_rate, cfg.beta1,
                    cfg.beta2, cfg.eps);
    }
  }

  double final_mse = 0.0;
  for (const auto& e : work) {
    const double r = net.forward(model.params, e.seq, scratch) - e.score;
    final_mse += r * r;
  }
  final_mse /= static_cast<double>(n);
  model.final_train_mse = final_mse * scale * scale;
  return model;
}

ProxyEnsemble::ProxyEnsemble(std::vector<ProxyModel> members,
                             double sigma_floor)
    : members_(std::move(members)), sigma_floor_(sigma_floor) {
  // A single member is tolerated (sigma collapses to the floor) so that
  // degenerate generation configs with Q=1 still yield a usable surrogate.
  if (members_.empty()) {
    throw std::invalid_argument("ensemble needs at least 1 member");
  }
}

MuSigma ProxyEnsemble::predict(const Sequence& s, Scratch& scratch) const {
  double mean = 0.0;
  double sq = 0.0;
  for (const auto& m : members_) {
    const double v = m.predict(s, scratch);
    mean += v;
    sq += v * v;
  }
  const auto n = static_cast<double>(members_.size());
  mean /= n;
  const double var = std::max(0.0, sq / n - mean * mean);
  return {mean, std::max(std::sqrt(var), sigma_floor_)};
}

MuSigma ProxyEnsemble::predict(const Sequence& s) const {
  Scratch sc;
  return predict(s, sc);
}

ProxyEnsemble build_ensemble(const RegressorSpec& spec, const Dataset& data,
                             int count, double p, const TrainConfig& cfg,
                             std::uint64_t seed, double sigma_floor) {
  if (count < 2) {
    throw std::invalid_argument("build_ensemble: count must be >= 2");
  }
  std::vector<ProxyModel> members;
  members.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    TrainConfig member_cfg = cfg;
    member_cfg.seed = derive_seed(seed, "ensemble_member", static_cast<std::uint64_t>(i));
    ProxyModel model;
    if (p < 1.0) {
      Rng sub_rng(derive_seed(seed, "ensemble_subsample",
                              static_cast<std::uint64_t>(i)));
      const auto subset = data.subsample(p, sub_rng);
      model = train_regressor(spec, subset, member_cfg);
    } else if (p == 1.0) {
      model = train_regressor(spec, data.entries(), member_cfg);
    } else {
      throw std::invalid_argument("build_ensemble: p must be in (0, 1]");
    }
    model.subsample_p = p;
    members.push_back(std::move(model));
  }
  return ProxyEnsemble(std::move(members), sigma_floor);
}

std::vector<CalibrationPoint> calibration_curve(
    const PredictFn& predict, std::span<const ScoredSequence> test,
    std::span<const double> levels) {
  if (test.size() < 10) {
    throw std::invalid_argument("calibration_curve: need >= 10 test points");
  }
  std::vector<double> z(levels.size());
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (!(levels[i] > 0.0 && levels[i] < 1.0)) {
      throw std::invalid_argument("calibration level outside (0, 1)");
    }
    z[i] = normal_quantile(0.5 * (1.0 + levels[i]));
  }
  std::vector<std::size_t> hits(levels.size(), 0);
  for (const auto& point : test) {
    const MuSigma pred = predict(point.seq);
    const double dev = std::abs(point.score - pred.mu);
    for (std::size_t i = 0; i < levels.size(); ++i) {
      if (dev <= z[i] * pred.sigma) ++hits[i];
    }
  }
  std::vector<CalibrationPoint> curve(levels.size());
  for (std::size_t i = 0; i < levels.size(); ++i) {
    curve[i] = {levels[i],
                static_cast<double>(hits[i]) / static_cast<double>(test.size())};
  }
  return curve;
}

std::vector<CalibrationPoint> calibration_curve(
    const ProxyEnsemble& ensemble, std::span<const ScoredSequence> test,
    std::span<const double> levels) {
  return calibration_curve(
      [&ensemble](const Sequence& s) { return ensemble.predict(s); }, test,
      levels);
}

std::vector<double> ensemble_nll(const PredictFn& predict,
                                 std::span<const ScoredSequence> test) {
  if (test.empty()) {
    throw std::invalid_argument("ensemble_nll: empty test set");
  }
  constexpr double kLog2Pi = 1.8378770664093453;
  std::vector<double> nll;
  nll.reserve(test.size());
  for (const auto& point : test) {
    const MuSigma pred = predict(point.seq);
    const double r = point.score - pred.mu;
    nll.push_back(0.5 * (kLog2Pi + 2.0 * std::log(pred.sigma)) +
                  r * r / (2.0 * pred.sigma * pred.sigma));
  }
  return nll;
}

std::vector<double> ensemble_nll(const ProxyEnsemble& ensemble,
                                 std::span<const ScoredSequence> test) {
  return ensemble_nll(
      [&ensemble](const Sequence& s) { return ensemble.predict(s); }, test);
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw std::invalid_argument("normal_quantile: p must be in (0, 1)");
  }
  // Acklam's rational approximation, then one Halley refinement.
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  double x;
  if (p < plow) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - plow) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) *
        q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
  const double u = e * std::sqrt(2.0 * 3.141592653589793) *
                   std::exp(0.5 * x * x);
  x -= u / (1.0 + 0.5 * x * u);
  return x;
}

}  // namespace metarlbo::surrogate
