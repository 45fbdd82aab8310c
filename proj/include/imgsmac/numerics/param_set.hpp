#pragma once

#include <cstddef>
#include <string>
#include <unordered_map>
#include <vector>

#include "imgsmac/common.hpp"
#include "imgsmac/numerics/tensor.hpp"

namespace imgsmac::numerics {

using ParamId = std::size_t;

template <Real Scalar>
struct Param {
  std::string name;
  Tensor<Scalar> value;
  Tensor<Scalar> grad;
  Tensor<Scalar> second_moment;  // RMSProp running average of g^2
};

/// Per-worker gradient accumulator shaped like a ParamSet.
template <Real Scalar>
class Gradients {
 public:
  Gradients() = default;
  explicit Gradients(std::vector<Tensor<Scalar>> grads) : grads_(std::move(grads)) {}

  Tensor<Scalar>& operator[](ParamId id) { return grads_[id]; }
  const Tensor<Scalar>& operator[](ParamId id) const { return grads_[id]; }
  std::size_t size() const { return grads_.size(); }

  void zero() {
    for (auto& g : grads_) g.fill(Scalar{0});
  }

  Gradients& operator+=(const Gradients& other) {
    require(other.size() == size(), "gradient buffer size mismatch");
    for (std::size_t p = 0; p < grads_.size(); ++p) {
      auto& dst = grads_[p].values();
      const auto& src = other.grads_[p].values();
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
    }
    return *this;
  }

  bool all_finite() const {
    for (const auto& g : grads_)
      if (!g.all_finite()) return false;
    return true;
  }

 private:
  std::vector<Tensor<Scalar>> grads_;
};

/// Named parameter tensors with matching gradient and optimizer-state tensors.
/// Insertion order is stable and defines ParamId.
template <Real Scalar>
class ParamSet {
 public:
  ParamId add(const std::string& name, Shape shape) {
    require(!index_.contains(name), "duplicate parameter name '" + name + "'");
    const ParamId id = params_.size();
    params_.push_back({name, Tensor<Scalar>(shape), Tensor<Scalar>(shape), Tensor<Scalar>(shape)});
    index_.emplace(name, id);
    return id;
  }

  std::size_t size() const { return params_.size(); }
  Param<Scalar>& operator[](ParamId id) { return params_[id]; }
  const Param<Scalar>& operator[](ParamId id) const { return params_[id]; }

  ParamId id(const std::string& name) const {
    auto it = index_.find(name);
    require(it != index_.end(), "unknown parameter '" + name + "'");
    return it->second;
  }
  bool contains(const std::string& name) const { return index_.contains(name); }

  Tensor<Scalar>& value(ParamId id) { return params_[id].value; }
  const Tensor<Scalar>& value(ParamId id) const { return params_[id].value; }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
  }

  Gradients<Scalar> make_gradients() const {
    std::vector<Tensor<Scalar>> g;
    g.reserve(params_.size());
    for (const auto& p : params_) g.emplace_back(p.value.shape());
    return Gradients<Scalar>(std::move(g));
  }

  void zero_grad() {
    for (auto& p : params_) p.grad.fill(Scalar{0});
  }

  void accumulate(const Gradients<Scalar>& g) {
    require(g.size() == params_.size(), "gradient buffer does not match parameter set");
    for (std::size_t p = 0; p < params_.size(); ++p) {
      auto& dst = params_[p].grad.values();
      const auto& src = g[p].values();
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
    }
  }

  /// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
  void init_uniform(ParamId id, std::size_t fan_in, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(fan_in, 1)));
    for (auto& v : params_[id].value.values()) v = static_cast<Scalar>((2.0 * uniform01(rng) - 1.0) * bound);
  }

 private:
  std::vector<Param<Scalar>> params_;
  std::unordered_map<std::string, ParamId> index_;
};

}  // namespace imgsmac::numerics
