#include "protoseg/layers.hpp"

#include <cmath>

namespace protoseg {

Linear::Linear(std::size_t in, std::size_t out, Rng& rng) {
  w = Tensor::zeros({in, out}, true);
  b = Tensor::zeros({1, out}, true);
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  for (double& v : w.mutable_values()) v = rng.uniform(-limit, limit);
}

void Linear::collect(const std::string& prefix, std::vector<NamedTensor>& out) const {
  out.emplace_back(prefix + ".w", w);
  out.emplace_back(prefix + ".b", b);
}

}  // namespace protoseg
