#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "metarlbo/checkpoint.hpp"
#include "metarlbo/dataset.hpp"
#include "metarlbo/rng.hpp"
#include "metarlbo/surrogate.hpp"

using namespace metarlbo;
using namespace metarlbo::surrogate;
using seqcore::Alphabet;
using seqcore::Dataset;
using seqcore::ScoredSequence;
using seqcore::Sequence;

namespace {

Sequence random_sequence(int alphabet_size, std::size_t len, Rng& rng) {
  Sequence s;
  s.tokens.resize(len);
  for (auto& t : s.tokens) {
    t = static_cast<std::uint8_t>(
        rng.uniform_int(static_cast<std::uint64_t>(alphabet_size)));
  }
  return s;
}

std::vector<ScoredSequence> random_batch(int alphabet_size, int max_length,
                                         std::size_t n, Rng& rng,
                                         bool variable = false) {
  std::vector<ScoredSequence> batch;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t len =
        variable ? 1 + rng.uniform_int(static_cast<std::uint64_t>(max_length))
                 : static_cast<std::size_t>(max_length);
    batch.push_back({random_sequence(alphabet_size, len, rng),
                     rng.normal(0.0, 1.0), 0});
  }
  return batch;
}

double relative_error(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

// Central finite differences of the minibatch MSE against the analytic
// gradient on randomly chosen coordinates.
void gradcheck_arch(Arch arch) {
  RegressorSpec spec{arch, 7, 4};
  const RegressorNet net(spec);
  std::vector<double> params(net.param_count());
  Rng rng(arch == Arch::mlp ? 21 : 22);
  net.init_params(params, rng);

  const auto batch = random_batch(4, 7, 12, rng, true);
  Scratch scratch;
  std::vector<double> grad(params.size(), 0.0);
  mse_loss_grad(net, params, batch, grad, scratch);

  auto loss_at = [&](const std::vector<double>& p) {
    double loss = 0.0;
    for (const auto& item : batch) {
      const double r = net.forward(p, item.seq, scratch) - item.score;
      loss += r * r;
    }
    return loss / static_cast<double>(batch.size());
  };

  int checked = 0;
  std::vector<double> probe = params;
  for (int trial = 0; trial < 20000 && checked < 110; ++trial) {
    const auto i = rng.uniform_int(params.size());
    const double h = 1e-6 * std::max(1.0, std::abs(params[i]));
    probe[i] = params[i] + h;
    const double up = loss_at(probe);
    probe[i] = params[i] - h;
    const double down = loss_at(probe);
    probe[i] = params[i];
    const double fd = (up - down) / (2.0 * h);
    if (std::abs(fd) < 1e-10 && std::abs(grad[i]) < 1e-10) continue;
    CHECK(relative_error(grad[i], fd) <= 1e-4);
    ++checked;
  }
  CHECK(checked >= 100);
}

}  // namespace

TEST_CASE("mlp MSE gradient matches finite differences") {
  gradcheck_arch(Arch::mlp);
}

TEST_CASE("conv1d MSE gradient matches finite differences") {
  gradcheck_arch(Arch::conv1d);
}

TEST_CASE("training fits a constant target") {
  RegressorSpec spec{Arch::conv1d, 8, 4};
  Rng rng(5);
  auto data = random_batch(4, 8, 40, rng);
  for (auto& e : data) e.score = 0.7;
  TrainConfig cfg;
  cfg.seed = 3;
  const ProxyModel model = train_regressor(spec, data, cfg);
  for (const auto& e : data) {
    CHECK(std::abs(model.predict(e.seq) - 0.7) < 0.05);
  }
}

TEST_CASE("training memorizes a single point") {
  RegressorSpec spec{Arch::mlp, 6, 3};
  Rng rng(6);
  const std::vector<ScoredSequence> data{
      {random_sequence(3, 6, rng), 1.37, 0}};
  TrainConfig cfg;
  cfg.seed = 4;
  const ProxyModel model = train_regressor(spec, data, cfg);
  CHECK(model.final_train_mse < 1e-10);
  CHECK(std::abs(model.predict(data[0].seq) - 1.37) < 1e-4);
}

TEST_CASE("training is deterministic under a fixed seed") {
  RegressorSpec spec{Arch::conv1d, 8, 4};
  Rng rng(7);
  const auto data = random_batch(4, 8, 60, rng);
  TrainConfig cfg;
  cfg.seed = 12;
  const ProxyModel m1 = train_regressor(spec, data, cfg);
  const ProxyModel m2 = train_regressor(spec, data, cfg);
  CHECK(m1.params == m2.params);
  cfg.seed = 13;
  const ProxyModel m3 = train_regressor(spec, data, cfg);
  CHECK(m1.params != m3.params);
}

TEST_CASE("training reports non-finite losses with context") {
  RegressorSpec spec{Arch::mlp, 6, 3};
  Rng rng(8);
  auto data = random_batch(3, 6, 10, rng);
  TrainConfig cfg;
  cfg.learning_rate = 1e200;  // guaranteed blow-up
  CHECK_THROWS_WITH_AS(train_regressor(spec, data, cfg),
                       doctest::Contains("epoch"), std::runtime_error);
}

TEST_CASE("ensemble mean/std and sigma floor") {
  RegressorSpec spec{Arch::conv1d, 6, 3};
  const RegressorNet net(spec);

  // All-zero parameters short-circuit the net to its output bias.
  auto member_with_bias = [&](double bias) {
    ProxyModel m;
    m.spec = spec;
    m.params.assign(net.param_count(), 0.0);
    std::size_t bias_offset = 0;
    for (const auto& t : net.layout().tensors()) {
      if (t.name == "out.bias") bias_offset = t.offset;
    }
    m.params[bias_offset] = bias;
    return m;
  };

  Rng rng(4);
  const Sequence probe = random_sequence(3, 6, rng);

  const ProxyEnsemble pair({member_with_bias(0.0), member_with_bias(1.0)});
  const MuSigma p = pair.predict(probe);
  CHECK(p.mu == doctest::Approx(0.5));
  CHECK(p.sigma == doctest::Approx(0.5));

  const ProxyEnsemble same({member_with_bias(0.3), member_with_bias(0.3)});
  CHECK(same.predict(probe).sigma == same.sigma_floor());

  // Members disagreeing by more than 2*floor push sigma strictly above it.
  const ProxyEnsemble split(
      {member_with_bias(0.0), member_with_bias(3e-3)});
  CHECK(split.predict(probe).sigma > split.sigma_floor());
}

TEST_CASE("build_ensemble member independence and predict finiteness") {
  const Alphabet a("ACGT");
  Dataset data(a);
  Rng rng(9);
  while (data.size() < 50) {
    data.insert(random_sequence(4, 8, rng), rng.uniform(), 0);
  }
  RegressorSpec spec{Arch::conv1d, 8, 4};
  TrainConfig cfg;
  cfg.epochs = 3;
  const auto ensemble = build_ensemble(spec, data, 4, 1.0, cfg, 77);
  REQUIRE(ensemble.members().size() == 4);
  CHECK(ensemble.members()[0].params != ensemble.members()[1].params);

  for (int i = 0; i < 10000; ++i) {
    const auto s = random_sequence(4, 8, rng);
    const MuSigma p = ensemble.predict(s);
    CHECK(std::isfinite(p.mu));
    CHECK(p.sigma >= ensemble.sigma_floor());
  }

  // Permutation invariance of the aggregation (up to roundoff).
  auto members = ensemble.members();
  std::reverse(members.begin(), members.end());
  const ProxyEnsemble reversed(std::move(members));
  const auto s = random_sequence(4, 8, rng);
  CHECK(ensemble.predict(s).mu ==
        doctest::Approx(reversed.predict(s).mu).epsilon(1e-12));
  CHECK(ensemble.predict(s).sigma ==
        doctest::Approx(reversed.predict(s).sigma).epsilon(1e-12));

  CHECK_THROWS_AS(build_ensemble(spec, data, 1, 1.0, cfg, 1),
                  std::invalid_argument);
}

TEST_CASE("subsampled ensemble members train on ceil(p|D|) points") {
  const Alphabet a("ACGT");
  Dataset data(a);
  Rng rng(10);
  while (data.size() < 100) {
    data.insert(random_sequence(4, 8, rng), rng.uniform(), 0);
  }
  RegressorSpec spec{Arch::mlp, 8, 4};
  TrainConfig cfg;
  cfg.epochs = 1;
  const auto ensemble = build_ensemble(spec, data, 3, 0.8, cfg, 5);
  for (const auto& m : ensemble.members()) CHECK(m.subsample_p == 0.8);
  Rng sub(1);
  CHECK(data.subsample(0.8, sub).size() == 80);
}

TEST_CASE("normal_quantile inverts the normal CDF") {
  CHECK(normal_quantile(0.95) ==
        doctest::Approx(1.6448536269514722).epsilon(1e-9));
  CHECK(normal_quantile(0.5) == doctest::Approx(0.0).scale(1.0));
  for (double p : {0.01, 0.1, 0.25, 0.5, 0.75, 0.9, 0.99}) {
    const double z = normal_quantile(p);
    const double back = 0.5 * std::erfc(-z / std::sqrt(2.0));
    CHECK(back == doctest::Approx(p).epsilon(1e-10));
  }
}

TEST_CASE("calibration: exact predictor traces the diagonal") {
  Rng rng(14);
  std::vector<ScoredSequence> test;
  auto mu_of = [](const Sequence& s) {
    return static_cast<double>(seqcore::SequenceHash{}(s) % 1000) / 500.0;
  };
  const double sigma_true = 0.4;
  for (int i = 0; i < 10000; ++i) {
    Sequence s = random_sequence(2, 10, rng);
    const double y = mu_of(s) + sigma_true * rng.normal();
    test.push_back({std::move(s), y, 0});
  }
  const std::vector<double> levels{0.1, 0.2, 0.3, 0.4, 0.5,
                                   0.6, 0.7, 0.8, 0.9};
  const PredictFn exact = [&](const Sequence& s) {
    return MuSigma{mu_of(s), sigma_true};
  };
  const auto curve = calibration_curve(exact, test, levels);
  REQUIRE(curve.size() == 9);
  for (const auto& point : curve) {
    CHECK(std::abs(point.observed - point.expected) <= 0.05);
  }

  // Collapsed-sigma predictor is overconfident: observed far below expected.
  const PredictFn collapsed = [&](const Sequence& s) {
    return MuSigma{mu_of(s), 1e-3};
  };
  const auto over = calibration_curve(collapsed, test, levels);
  for (const auto& point : over) {
    if (point.expected < 0.9) CHECK(point.observed < point.expected);
  }

  CHECK_THROWS_AS(
      calibration_curve(exact, std::span<const ScoredSequence>{}, levels),
      std::invalid_argument);
}

TEST_CASE("nll closed forms") {
  const PredictFn unit = [](const Sequence&) { return MuSigma{2.0, 1.0}; };
  std::vector<ScoredSequence> at_mean{{Sequence{{0, 1}}, 2.0, 0}};
  const auto nll0 = ensemble_nll(unit, at_mean);
  CHECK(nll0[0] == doctest::Approx(0.9189385332046727).epsilon(1e-12));

  const double sigma = 0.37;
  const PredictFn scaled = [&](const Sequence&) { return MuSigma{1.0, sigma}; };
  std::vector<ScoredSequence> at_one_sigma{{Sequence{{0}}, 1.0 + sigma, 0}};
  const auto nll1 = ensemble_nll(scaled, at_one_sigma);
  CHECK(nll1[0] ==
        doctest::Approx(
            0.5 * std::log(2.0 * 3.141592653589793 * sigma * sigma) + 0.5)
            .epsilon(1e-12));
}

TEST_CASE("checkpoint round trip is bit-exact") {
  RegressorSpec spec{Arch::conv1d, 9, 5};
  const RegressorNet net(spec);
  std::vector<double> params(net.param_count());
  Rng rng(31);
  net.init_params(params, rng);

  Checkpoint ckpt;
  ckpt.header.emplace_back("kind", "regressor");
  ckpt.header.emplace_back("arch", to_string(spec.arch));
  ckpt.header.emplace_back("max_length", std::to_string(spec.max_length));
  ckpt.tensors = net.layout().tensors();
  ckpt.values = params;

  const auto path =
      std::filesystem::temp_directory_path() / "metarlbo_ckpt_test.ckpt";
  ckpt.save(path.string());
  const Checkpoint loaded = Checkpoint::load(path.string());
  CHECK(loaded.header_value("arch") == "conv1d");
  REQUIRE(loaded.tensors.size() == ckpt.tensors.size());
  for (std::size_t i = 0; i < loaded.tensors.size(); ++i) {
    CHECK(loaded.tensors[i].name == ckpt.tensors[i].name);
    CHECK(loaded.tensors[i].shape == ckpt.tensors[i].shape);
    CHECK(loaded.tensors[i].offset == ckpt.tensors[i].offset);
  }
  CHECK(loaded.values == params);
  std::filesystem::remove(path);
}
