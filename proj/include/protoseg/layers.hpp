#pragma once

#include <string>
#include <vector>

#include "protoseg/rng.hpp"
#include "protoseg/tensor.hpp"

namespace protoseg {

/// Dense layer y = x·W + b with W of shape in x out and a 1 x out bias.
/// Weights get Xavier-uniform init, biases start at zero.
struct Linear {
  Tensor w, b;

  Linear() = default;
  Linear(std::size_t in, std::size_t out, Rng& rng);

  std::size_t in_dim() const { return w.rows(); }
  std::size_t out_dim() const { return w.cols(); }

  Tensor operator()(const Tensor& x) const { return add_bias(matmul(x, w), b); }

  void collect(const std::string& prefix, std::vector<NamedTensor>& out) const;
};

}  // namespace protoseg
