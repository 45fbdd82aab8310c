#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "imgsmac/numerics/param_set.hpp"

namespace imgsmac::numerics {

enum class Activation { identity, tanh, relu, sigmoid, softmax };

template <Real Scalar>
inline Scalar sigmoid(Scalar x) {
  return x >= 0 ? Scalar{1} / (Scalar{1} + std::exp(-x)) : std::exp(x) / (Scalar{1} + std::exp(x));
}

template <Real Scalar>
void softmax_inplace(std::span<Scalar> z) {
  const Scalar mx = *std::max_element(z.begin(), z.end());
  Scalar sum{0};
  for (auto& v : z) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (auto& v : z) v /= sum;
}

template <Real Scalar>
void apply_activation(Activation act, std::span<Scalar> z) {
  switch (act) {
    case Activation::identity:
      break;
    case Activation::tanh:
      for (auto& v : z) v = std::tanh(v);
      break;
    case Activation::relu:
      for (auto& v : z) v = std::max(v, Scalar{0});
      break;
    case Activation::sigmoid:
      for (auto& v : z) v = sigmoid(v);
      break;
    case Activation::softmax:
      softmax_inplace(z);
      break;
  }
}

/// Gradient wrt pre-activation z given output y = act(z) and dL/dy.
template <Real Scalar>
void activation_backward(Activation act, std::span<const Scalar> y, std::span<const Scalar> dy,
                         std::span<Scalar> dz) {
  const std::size_t n = y.size();
  switch (act) {
    case Activation::identity:
      std::copy(dy.begin(), dy.end(), dz.begin());
      break;
    case Activation::tanh:
      for (std::size_t k = 0; k < n; ++k) dz[k] = dy[k] * (Scalar{1} - y[k] * y[k]);
      break;
    case Activation::relu:
      for (std::size_t k = 0; k < n; ++k) dz[k] = y[k] > 0 ? dy[k] : Scalar{0};
      break;
    case Activation::sigmoid:
      for (std::size_t k = 0; k < n; ++k) dz[k] = dy[k] * y[k] * (Scalar{1} - y[k]);
      break;
    case Activation::softmax: {
      Scalar dot{0};
      for (std::size_t k = 0; k < n; ++k) dot += dy[k] * y[k];
      for (std::size_t k = 0; k < n; ++k) dz[k] = y[k] * (dy[k] - dot);
      break;
    }
  }
}

template <Real Scalar>
struct DenseCache {
  std::vector<Scalar> input;
  std::vector<Scalar> output;
};

/// y = act(x W + b) with W of shape {in, out}.
template <Real Scalar>
class Dense {
 public:
  Dense() = default;
  Dense(ParamSet<Scalar>& params, const std::string& name, std::size_t in, std::size_t out, Activation act)
      : in_(in), out_(out), act_(act) {
    weight_ = params.add(name + ".W", {in, out});
    bias_ = params.add(name + ".b", {out});
  }

  std::size_t in_dim() const { return in_; }
  std::size_t out_dim() const { return out_; }
  Activation activation() const { return act_; }
  ParamId weight_id() const { return weight_; }
  ParamId bias_id() const { return bias_; }

  void init(ParamSet<Scalar>& params, Rng& rng) const {
    params.init_uniform(weight_, in_, rng);
    params.init_uniform(bias_, in_, rng);
  }

  /// Pre-activation z = x W + b.
  void affine(const ParamSet<Scalar>& params, std::span<const Scalar> x, std::span<Scalar> z) const {
    require(x.size() == in_, "dense input dim " + std::to_string(x.size()) + " != " + std::to_string(in_));
    const Scalar* w = params.value(weight_).data();
    const Scalar* b = params.value(bias_).data();
    std::copy(b, b + out_, z.begin());
    for (std::size_t i = 0; i < in_; ++i) {
      const Scalar xi = x[i];
      if (xi == Scalar{0}) continue;
      const Scalar* row = w + i * out_;
      for (std::size_t o = 0; o < out_; ++o) z[o] += xi * row[o];
    }
  }

  DenseCache<Scalar> forward(const ParamSet<Scalar>& params, std::span<const Scalar> x) const {
    DenseCache<Scalar> cache{std::vector<Scalar>(x.begin(), x.end()), std::vector<Scalar>(out_)};
    affine(params, x, cache.output);
    apply_activation<Scalar>(act_, cache.output);
    return cache;
  }

  /// Accumulates parameter gradients; writes dL/dx into dx when non-empty (accumulating).
  void backward(const ParamSet<Scalar>& params, const DenseCache<Scalar>& cache, std::span<const Scalar> dy,
                Gradients<Scalar>& grads, std::span<Scalar> dx) const {
    std::vector<Scalar> dz(out_);
    activation_backward<Scalar>(act_, cache.output, dy, dz);
    backward_from_preactivation(params, cache.input, dz, grads, dx);
  }

  void backward_from_preactivation(const ParamSet<Scalar>& params, std::span<const Scalar> x,
                                   std::span<const Scalar> dz, Gradients<Scalar>& grads,
                                   std::span<Scalar> dx) const {
    Scalar* gw = grads[weight_].data();
    Scalar* gb = grads[bias_].data();
    const Scalar* w = params.value(weight_).data();
    for (std::size_t o = 0; o < out_; ++o) gb[o] += dz[o];
    for (std::size_t i = 0; i < in_; ++i) {
      const Scalar xi = x[i];
      Scalar* grow = gw + i * out_;
      const Scalar* row = w + i * out_;
      Scalar acc{0};
      for (std::size_t o = 0; o < out_; ++o) {
        grow[o] += xi * dz[o];
        acc += row[o] * dz[o];
      }
      if (!dx.empty()) dx[i] += acc;
    }
  }

 private:
  std::size_t in_ = 0, out_ = 0;
  Activation act_ = Activation::identity;
  ParamId weight_ = 0, bias_ = 0;
};

}  // namespace imgsmac::numerics
