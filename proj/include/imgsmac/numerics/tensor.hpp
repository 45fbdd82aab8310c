#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "imgsmac/common.hpp"

namespace imgsmac::numerics {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

/// Dense row-major array. A rank-2 tensor of shape {rows, cols} is indexed (r, c) -> r * cols + c.
template <Real Scalar>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, Scalar fill = Scalar{0})
      : shape_(std::move(shape)), values_(shape_size(shape_), fill) {}
  Tensor(Shape shape, std::vector<Scalar> values) : shape_(std::move(shape)), values_(std::move(values)) {
    require(values_.size() == shape_size(shape_),
            "tensor value count " + std::to_string(values_.size()) + " does not match shape " + shape_string(shape_));
  }

  static Tensor vector(std::vector<Scalar> values) {
    const std::size_t n = values.size();
    return Tensor({n}, std::move(values));
  }

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return values_.size(); }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }

  Scalar* data() { return values_.data(); }
  const Scalar* data() const { return values_.data(); }
  std::span<Scalar> span() { return values_; }
  std::span<const Scalar> span() const { return values_; }
  std::vector<Scalar>& values() { return values_; }
  const std::vector<Scalar>& values() const { return values_; }

  Scalar& operator[](std::size_t i) { return values_[i]; }
  Scalar operator[](std::size_t i) const { return values_[i]; }
  Scalar& at(std::size_t r, std::size_t c) { return values_[r * shape_[1] + c]; }
  Scalar at(std::size_t r, std::size_t c) const { return values_[r * shape_[1] + c]; }

  void fill(Scalar v) { std::fill(values_.begin(), values_.end(), v); }

  bool all_finite() const {
    return std::all_of(values_.begin(), values_.end(), [](Scalar v) { return std::isfinite(v); });
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<Scalar> values_;
};

template <Real Scalar>
bool all_finite(std::span<const Scalar> xs) {
  return std::all_of(xs.begin(), xs.end(), [](Scalar v) { return std::isfinite(v); });
}

}  // namespace imgsmac::numerics
