#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace metarlbo::nn {

struct TensorSpec {
  std::string name;
  std::vector<int> shape;
  std::size_t offset = 0;
  std::size_t size = 0;
};

// Maps named tensors onto one flat parameter vector. A flat vector keeps
// gradient checks, SGD/Adam updates, and meta-parameter arithmetic trivial.
class ParamLayout {
 public:
  std::size_t add(std::string name, std::vector<int> shape) {
    std::size_t size = 1;
    for (int d : shape) size *= static_cast<std::size_t>(d);
    const std::size_t offset = total_;
    tensors_.push_back({std::move(name), std::move(shape), offset, size});
    total_ += size;
    return offset;
  }

  std::size_t total() const { return total_; }
  const std::vector<TensorSpec>& tensors() const { return tensors_; }

 private:
  std::vector<TensorSpec> tensors_;
  std::size_t total_ = 0;
};

struct AdamState {
  std::vector<double> m, v;
  long long t = 0;

  explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
};

inline void adam_step(std::span<double> params, std::span<const double> grad,
                      AdamState& state, double lr, double beta1, double beta2,
                      double eps) {
  ++state.t;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * grad[i];
    state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * grad[i] * grad[i];
    params[i] -= lr * (state.m[i] / c1) / (std::sqrt(state.v[i] / c2) + eps);
  }
}

// y = W x + b with W stored row-major as [out][in].
inline void linear_forward(std::span<const double> w, std::span<const double> b,
                           std::span<const double> x, std::span<double> y) {
  const std::size_t out = y.size(), in = x.size();
  for (std::size_t j = 0; j < out; ++j) {
    const double* row = w.data() + j * in;
    double acc = b[j];
    for (std::size_t i = 0; i < in; ++i) acc += row[i] * x[i];
    y[j] = acc;
  }
}

// Accumulates dW += gy (x)T, db += gy and optionally gx = W^T gy.
inline void linear_backward(std::span<const double> w,
                            std::span<const double> x,
                            std::span<const double> gy, std::span<double> gw,
                            std::span<double> gb, std::span<double> gx) {
  const std::size_t out = gy.size(), in = x.size();
  if (!gx.empty()) {
    for (std::size_t i = 0; i < in; ++i) gx[i] = 0.0;
  }
  for (std::size_t j = 0; j < out; ++j) {
    const double g = gy[j];
    gb[j] += g;
    double* grow = gw.data() + j * in;
    const double* row = w.data() + j * in;
    for (std::size_t i = 0; i < in; ++i) grow[i] += g * x[i];
    if (!gx.empty()) {
      for (std::size_t i = 0; i < in; ++i) gx[i] += row[i] * g;
    }
  }
}

inline void relu_inplace(std::span<double> x) {
  for (double& v : x) v = v > 0.0 ? v : 0.0;
}

}  // namespace metarlbo::nn
