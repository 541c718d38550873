#pragma once

#include <string>
#include <vector>

#include "protoseg/cloud.hpp"
#include "protoseg/layers.hpp"

namespace protoseg {

/// Per-point prototype head: F -> 128 -> M, raw linear output so
/// prototypes can cancel each other when mixed.
struct ProtoScoreNet {
  std::size_t feat_dim = 0;
  std::size_t m = 0;
  Linear l1, l2;

  ProtoScoreNet() = default;
  ProtoScoreNet(std::size_t feat_dim, std::size_t m, Rng& rng);

  /// feats: N x F -> N x M.
  Tensor operator()(const Tensor& feats) const;

  void collect(std::vector<NamedTensor>& out) const;
};

/// One JSON object per line: {"prototype", "x", "y", "z", "score"} with
/// scores min-max normalized to [0,1] per prototype column (a constant
/// column maps to all zeros).
std::string export_prototype_scores(const Tensor& prototypes, const PointCloud& cloud,
                                    std::span<const std::size_t> ids);

}  // namespace protoseg
