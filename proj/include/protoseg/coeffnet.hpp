#pragma once

#include <vector>

#include "protoseg/geometry.hpp"
#include "protoseg/layers.hpp"

namespace protoseg {

/// Multi-scale neighborhood config for the coefficient head. The shared
/// neighbor index must be built with k_base >= k * max(dilations).
struct DpiConfig {
  std::vector<std::size_t> dilations{1, 2, 4, 8};
  std::size_t k = 16;
  std::size_t branch_width = 32;
  std::size_t fusion_width = 128;

  std::size_t k_base() const { return k * dilations.back(); }
  void validate() const;
};

/// One point-convolution branch: a kernel MLP maps each relative neighbor
/// coordinate (3) to F weights, which gate the neighbor's features; the
/// gated features are summed per sample and lifted to branch_width.
struct PointConvBranch {
  Linear kmlp1, kmlp2, lift;

  PointConvBranch() = default;
  PointConvBranch(std::size_t feat_dim, std::size_t branch_width, Rng& rng);
};

/// Coefficient head: one PointConvBranch per dilation over the shared
/// sorted neighbor lists, branch outputs concatenated, fused by an MLP,
/// and squashed by tanh into (-1,1).
struct CoeffNet {
  DpiConfig cfg;
  std::size_t feat_dim = 0;
  std::size_t m = 0;
  std::vector<PointConvBranch> branches;
  Linear fuse1, fuse2;

  CoeffNet() = default;
  CoeffNet(const DpiConfig& cfg, std::size_t feat_dim, std::size_t m, Rng& rng);

  /// samples: K point indices; nbrs: shared neighbor lists over all N
  /// points (coordinate space); feats: N x F; coords: N x 3 row-major.
  /// Returns K x M coefficients.
  Tensor operator()(std::span<const std::size_t> samples, const NeighborIndex& nbrs,
                    const Tensor& feats, std::span<const double> coords) const;

  void collect(std::vector<NamedTensor>& out) const;
};

}  // namespace protoseg
