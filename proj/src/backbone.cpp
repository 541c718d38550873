#include "protoseg/backbone.hpp"

#include <array>
#include <stdexcept>
#include <string>

namespace protoseg {

namespace {
constexpr std::size_t kHidden = 64;
}

Backbone::Backbone(std::size_t in, std::size_t feat, Rng& rng)
    : in_channels(in),
      feat_dim(feat),
      l1(in, kHidden, rng),
      l2(kHidden, kHidden, rng),
      fuse(2 * kHidden, feat, rng) {}

Tensor Backbone::operator()(const Tensor& x) const {
  if (x.rank() != 2 || x.cols() != in_channels)
    throw std::invalid_argument("backbone: expected Nx" + std::to_string(in_channels) +
                                " input, got " + shape_string(x.shape()));
  const std::size_t n = x.rows();
  Tensor h = relu(l1(x));
  h = relu(l2(h));
  Tensor pooled = reshape(reduce_max(h, 0), {1, kHidden});
  const std::array<Tensor, 2> parts{h, tile_rows(pooled, n)};
  return fuse(concat_cols(parts));
}

void Backbone::collect(std::vector<NamedTensor>& out) const {
  l1.collect("backbone.l1", out);
  l2.collect("backbone.l2", out);
  fuse.collect("backbone.fuse", out);
}

}  // namespace protoseg
