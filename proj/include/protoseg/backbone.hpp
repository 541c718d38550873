#pragma once

#include <vector>

#include "protoseg/layers.hpp"

namespace protoseg {

/// Shared per-point feature extractor: per-point MLP in->64->64, global
/// max-pool, pooled vector concatenated back onto every point, then a
/// linear fusion 128->F. Permutation-equivariant by construction.
struct Backbone {
  std::size_t in_channels = 0;
  std::size_t feat_dim = 0;
  Linear l1, l2, fuse;

  Backbone() = default;
  Backbone(std::size_t in_channels, std::size_t feat_dim, Rng& rng);

  /// x: N x in_channels -> N x feat_dim.
  Tensor operator()(const Tensor& x) const;

  void collect(std::vector<NamedTensor>& out) const;
};

}  // namespace protoseg
