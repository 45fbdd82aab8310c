#pragma once

#include <limits>
#include <span>
#include <string>
#include <vector>

#include "imgsmac/numerics/param_set.hpp"

namespace imgsmac::numerics {

template <Real Scalar>
struct Quantized {
  int token_id = -1;
  std::vector<Scalar> message;
};

/// Nearest prototype (rows of a {K, d} tensor) by Euclidean distance; ties go to the lowest id.
template <Real Scalar>
Quantized<Scalar> prototype_quantize(std::span<const Scalar> h, const Tensor<Scalar>& bank) {
  require(bank.rank() == 2 && bank.dim(0) > 0, "prototype bank is empty");
  const std::size_t K = bank.dim(0), d = bank.dim(1);
  require(h.size() == d, "quantize input dim " + std::to_string(h.size()) + " != message dim " + std::to_string(d));
  int best = 0;
  Scalar best_dist = std::numeric_limits<Scalar>::infinity();
  for (std::size_t k = 0; k < K; ++k) {
    Scalar dist{0};
    for (std::size_t j = 0; j < d; ++j) {
      const Scalar diff = h[j] - bank.at(k, j);
      dist += diff * diff;
    }
    if (dist < best_dist) {
      best_dist = dist;
      best = static_cast<int>(k);
    }
  }
  Quantized<Scalar> q;
  q.token_id = best;
  q.message.assign(bank.data() + best * d, bank.data() + (best + 1) * d);
  return q;
}

/// Trainable prototype bank. Backward uses the straight-through estimator for the
/// projection, plus a commitment term beta*|h - sg(m)|^2 and a codebook term |sg(h) - m|^2.
template <Real Scalar>
class PrototypeBank {
 public:
  PrototypeBank() = default;
  PrototypeBank(ParamSet<Scalar>& params, const std::string& name, std::size_t count, std::size_t dim,
                Scalar commitment = Scalar(0.25))
      : count_(count), dim_(dim), commitment_(commitment) {
    require(count >= 2, "prototype bank needs at least 2 prototypes");
    id_ = params.add(name, {count, dim});
  }

  std::size_t count() const { return count_; }
  std::size_t dim() const { return dim_; }
  ParamId id() const { return id_; }
  Scalar commitment() const { return commitment_; }

  /// Unit Gaussian scaled by 0.1.
  void init(ParamSet<Scalar>& params, Rng& rng) const {
    for (auto& v : params.value(id_).values()) v = static_cast<Scalar>(0.1 * standard_normal(rng));
  }

  Quantized<Scalar> quantize(const ParamSet<Scalar>& params, std::span<const Scalar> h) const {
    return prototype_quantize<Scalar>(h, params.value(id_));
  }

  /// Value of the commitment + codebook terms for one quantization.
  Scalar auxiliary_loss(std::span<const Scalar> h, std::span<const Scalar> m) const {
    Scalar sq{0};
    for (std::size_t j = 0; j < dim_; ++j) sq += (h[j] - m[j]) * (h[j] - m[j]);
    return (commitment_ + Scalar{1}) * sq;
  }

  /// dm: gradient wrt the emitted message. Writes dL/dh (accumulating) and prototype grads.
  /// aux_weight scales the commitment/codebook terms.
  void backward(std::span<const Scalar> h, const Quantized<Scalar>& q, std::span<const Scalar> dm,
                Scalar aux_weight, Gradients<Scalar>& grads, std::span<Scalar> dh) const {
    Scalar* gbank = grads[id_].data() + q.token_id * dim_;
    for (std::size_t j = 0; j < dim_; ++j) {
      const Scalar diff = h[j] - q.message[j];
      dh[j] += dm[j] + aux_weight * Scalar{2} * commitment_ * diff;
      gbank[j] -= aux_weight * Scalar{2} * diff;
    }
  }

 private:
  std::size_t count_ = 0, dim_ = 0;
  Scalar commitment_ = Scalar(0.25);
  ParamId id_ = 0;
};

}  // namespace imgsmac::numerics
