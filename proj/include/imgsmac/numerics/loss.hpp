#pragma once

#include <span>
#include <string>

#include "imgsmac/numerics/tensor.hpp"

namespace imgsmac::numerics {

/// Sum of squared differences.
template <Real Scalar>
Scalar l2_loss(std::span<const Scalar> a, std::span<const Scalar> b) {
  require(a.size() == b.size(),
          "l2_loss shape mismatch: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  Scalar s{0};
  for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return s;
}

/// Accumulates scale * d(l2_loss)/da = scale * 2(a - b) into grad.
template <Real Scalar>
void l2_loss_grad(std::span<const Scalar> a, std::span<const Scalar> b, Scalar scale, std::span<Scalar> grad) {
  require(a.size() == b.size() && grad.size() == a.size(), "l2_loss_grad shape mismatch");
  for (std::size_t k = 0; k < a.size(); ++k) grad[k] += scale * Scalar{2} * (a[k] - b[k]);
}

template <Real Scalar>
Scalar l2_loss(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  require(a.shape() == b.shape(), "l2_loss shape mismatch: " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  return l2_loss<Scalar>(a.span(), b.span());
}

}  // namespace imgsmac::numerics
