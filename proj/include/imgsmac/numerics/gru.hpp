#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "imgsmac/numerics/dense.hpp"

namespace imgsmac::numerics {

template <Real Scalar>
struct GruCache {
  std::vector<Scalar> input;
  std::vector<Scalar> hidden_prev;
  std::vector<Scalar> update;      // z
  std::vector<Scalar> reset;       // r
  std::vector<Scalar> candidate;   // tanh candidate
  std::vector<Scalar> reset_hidden;  // r * h_prev
  std::vector<Scalar> hidden;
};

/// Gated recurrent cell:
///   z = sigmoid(x Wz + h Uz + bz)
///   r = sigmoid(x Wr + h Ur + br)
///   c = tanh(x Wc + (r * h) Uc + bc)
///   h' = (1 - z) * h + z * c
/// Input weights are packed as {in, 3H} in z|r|c column blocks, recurrent z|r weights as {H, 2H}.
template <Real Scalar>
class GruCell {
 public:
  GruCell() = default;
  GruCell(ParamSet<Scalar>& params, const std::string& name, std::size_t in, std::size_t hidden)
      : in_(in), hidden_(hidden) {
    wx_ = params.add(name + ".Wx", {in, 3 * hidden});
    uzr_ = params.add(name + ".Uzr", {hidden, 2 * hidden});
    uc_ = params.add(name + ".Uc", {hidden, hidden});
    bias_ = params.add(name + ".b", {3 * hidden});
  }

  std::size_t in_dim() const { return in_; }
  std::size_t hidden_dim() const { return hidden_; }

  void init(ParamSet<Scalar>& params, Rng& rng) const {
    params.init_uniform(wx_, in_, rng);
    params.init_uniform(uzr_, hidden_, rng);
    params.init_uniform(uc_, hidden_, rng);
    params.init_uniform(bias_, hidden_, rng);
  }

  GruCache<Scalar> forward(const ParamSet<Scalar>& params, std::span<const Scalar> x,
                           std::span<const Scalar> h_prev) const {
    require(x.size() == in_, "gru input dim " + std::to_string(x.size()) + " != " + std::to_string(in_));
    require(h_prev.size() == hidden_,
            "gru hidden dim " + std::to_string(h_prev.size()) + " != " + std::to_string(hidden_));
    const std::size_t H = hidden_;
    GruCache<Scalar> c;
    c.input.assign(x.begin(), x.end());
    c.hidden_prev.assign(h_prev.begin(), h_prev.end());

    // a = x Wx + b, all three blocks
    std::vector<Scalar> a(3 * H);
    const Scalar* wx = params.value(wx_).data();
    const Scalar* b = params.value(bias_).data();
    std::copy(b, b + 3 * H, a.begin());
    for (std::size_t i = 0; i < in_; ++i) {
      const Scalar xi = x[i];
      if (xi == Scalar{0}) continue;
      const Scalar* row = wx + i * 3 * H;
      for (std::size_t o = 0; o < 3 * H; ++o) a[o] += xi * row[o];
    }
    const Scalar* uzr = params.value(uzr_).data();
    for (std::size_t k = 0; k < H; ++k) {
      const Scalar hk = h_prev[k];
      if (hk == Scalar{0}) continue;
      const Scalar* row = uzr + k * 2 * H;
      for (std::size_t o = 0; o < 2 * H; ++o) a[o] += hk * row[o];
    }
    c.update.resize(H);
    c.reset.resize(H);
    for (std::size_t o = 0; o < H; ++o) {
      c.update[o] = sigmoid(a[o]);
      c.reset[o] = sigmoid(a[H + o]);
    }
    c.reset_hidden.resize(H);
    for (std::size_t k = 0; k < H; ++k) c.reset_hidden[k] = c.reset[k] * h_prev[k];
    const Scalar* uc = params.value(uc_).data();
    for (std::size_t k = 0; k < H; ++k) {
      const Scalar rk = c.reset_hidden[k];
      if (rk == Scalar{0}) continue;
      const Scalar* row = uc + k * H;
      for (std::size_t o = 0; o < H; ++o) a[2 * H + o] += rk * row[o];
    }
    c.candidate.resize(H);
    c.hidden.resize(H);
    for (std::size_t o = 0; o < H; ++o) {
      c.candidate[o] = std::tanh(a[2 * H + o]);
      c.hidden[o] = (Scalar{1} - c.update[o]) * h_prev[o] + c.update[o] * c.candidate[o];
    }
    return c;
  }

  /// Backpropagates dL/dh'. Accumulates into dx and dh_prev (either may be empty) and into grads.
  void backward(const ParamSet<Scalar>& params, const GruCache<Scalar>& c, std::span<const Scalar> dh,
                Gradients<Scalar>& grads, std::span<Scalar> dx, std::span<Scalar> dh_prev) const {
    const std::size_t H = hidden_;
    std::vector<Scalar> da(3 * H);  // pre-activation grads z|r|c
    std::vector<Scalar> dh_direct(H);
    for (std::size_t o = 0; o < H; ++o) {
      const Scalar z = c.update[o];
      const Scalar cand = c.candidate[o];
      dh_direct[o] = dh[o] * (Scalar{1} - z);
      da[o] = dh[o] * (cand - c.hidden_prev[o]) * z * (Scalar{1} - z);
      da[2 * H + o] = dh[o] * z * (Scalar{1} - cand * cand);
    }
    // candidate path through (r * h_prev) Uc
    const Scalar* uc = params.value(uc_).data();
    Scalar* guc = grads[uc_].data();
    std::vector<Scalar> d_rh(H);
    for (std::size_t k = 0; k < H; ++k) {
      const Scalar rk = c.reset_hidden[k];
      const Scalar* row = uc + k * H;
      Scalar* grow = guc + k * H;
      Scalar acc{0};
      for (std::size_t o = 0; o < H; ++o) {
        grow[o] += rk * da[2 * H + o];
        acc += row[o] * da[2 * H + o];
      }
      d_rh[k] = acc;
    }
    for (std::size_t k = 0; k < H; ++k) {
      const Scalar r = c.reset[k];
      da[H + k] = d_rh[k] * c.hidden_prev[k] * r * (Scalar{1} - r);
      dh_direct[k] += d_rh[k] * r;
    }
    // recurrent z|r weights
    const Scalar* uzr = params.value(uzr_).data();
    Scalar* guzr = grads[uzr_].data();
    for (std::size_t k = 0; k < H; ++k) {
      const Scalar hk = c.hidden_prev[k];
      const Scalar* row = uzr + k * 2 * H;
      Scalar* grow = guzr + k * 2 * H;
      Scalar acc{0};
      for (std::size_t o = 0; o < 2 * H; ++o) {
        grow[o] += hk * da[o];
        acc += row[o] * da[o];
      }
      dh_direct[k] += acc;
    }
    if (!dh_prev.empty())
      for (std::size_t k = 0; k < H; ++k) dh_prev[k] += dh_direct[k];
    // input weights and bias
    Scalar* gb = grads[bias_].data();
    for (std::size_t o = 0; o < 3 * H; ++o) gb[o] += da[o];
    const Scalar* wx = params.value(wx_).data();
    Scalar* gwx = grads[wx_].data();
    for (std::size_t i = 0; i < in_; ++i) {
      const Scalar xi = c.input[i];
      const Scalar* row = wx + i * 3 * H;
      Scalar* grow = gwx + i * 3 * H;
      Scalar acc{0};
      for (std::size_t o = 0; o < 3 * H; ++o) {
        grow[o] += xi * da[o];
        acc += row[o] * da[o];
      }
      if (!dx.empty()) dx[i] += acc;
    }
  }

 private:
  std::size_t in_ = 0, hidden_ = 0;
  ParamId wx_ = 0, uzr_ = 0, uc_ = 0, bias_ = 0;
};

}  // namespace imgsmac::numerics
