#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "protoseg/cloud.hpp"
#include "protoseg/rng.hpp"

namespace protoseg {

/// Frame the network sees a cloud in: XYZ is shifted by `corner`, and the
/// room bounds feed the 3 normalized-location channels. For a whole cloud
/// both come from its own bounding box; for a block the corner is the
/// block's, the bounds the room's.
struct InputContext {
  double corner[3];
  double room_lo[3];
  double room_hi[3];
};

InputContext whole_cloud_context(const PointCloud& cloud);

struct Block {
  double x0 = 0.0;
  double y0 = 0.0;
  std::vector<std::size_t> points;  // indices into the room cloud
};

/// Overlapping XY grid over a room. Every room point lands in at least one
/// block; blocks that would be empty are dropped.
struct BlockLayout {
  double size = 1.0;
  double stride = 0.5;
  double room_lo[3];
  double room_hi[3];
  std::vector<Block> blocks;

  InputContext context(std::size_t b) const;
};

BlockLayout slice_blocks(const PointCloud& room, double size = 1.0, double stride = 0.5);

/// Training-style fixed-size draw from one block: without replacement when
/// the block has at least n_sample points, with replacement otherwise.
std::vector<std::size_t> sample_block(const BlockLayout& layout, std::size_t b,
                                      std::size_t n_sample, Rng& rng);

/// SGPN-style reconciliation of per-block instance labelings into one room
/// labeling. Blocks are visited in layout order; each block instance merges
/// into the global instance sharing the most overlap points when their
/// overlap IoU (restricted to this block's already-labeled points) reaches
/// merge_t, and registers as a new instance otherwise. Contested points go
/// to the last writer.
std::vector<std::int32_t> block_merge(const BlockLayout& layout,
                                      const std::vector<std::vector<std::int32_t>>& block_labels,
                                      std::size_t n_room, double merge_t = 0.5);

}  // namespace protoseg
