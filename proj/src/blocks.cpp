#include "protoseg/blocks.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>

namespace protoseg {

namespace {
constexpr double kEdgeEps = 1e-9;
}

InputContext whole_cloud_context(const PointCloud& cloud) {
  InputContext ctx{};
  cloud.bounds(ctx.room_lo, ctx.room_hi);
  for (int c = 0; c < 3; ++c) ctx.corner[c] = ctx.room_lo[c];
  return ctx;
}

InputContext BlockLayout::context(std::size_t b) const {
  const Block& blk = blocks.at(b);
  InputContext ctx{};
  ctx.corner[0] = blk.x0;
  ctx.corner[1] = blk.y0;
  ctx.corner[2] = room_lo[2];
  for (int c = 0; c < 3; ++c) {
    ctx.room_lo[c] = room_lo[c];
    ctx.room_hi[c] = room_hi[c];
  }
  return ctx;
}

BlockLayout slice_blocks(const PointCloud& room, double size, double stride) {
  if (room.size() == 0) throw std::invalid_argument("slice_blocks: empty room");
  if (size <= 0.0 || stride <= 0.0)
    throw std::invalid_argument("slice_blocks: size and stride must be positive");

  BlockLayout layout;
  layout.size = size;
  layout.stride = stride;
  room.bounds(layout.room_lo, layout.room_hi);

  const double ex = layout.room_hi[0] - layout.room_lo[0];
  const double ey = layout.room_hi[1] - layout.room_lo[1];
  const auto steps = [&](double extent) -> std::size_t {
    if (extent <= size) return 1;
    return 1 + static_cast<std::size_t>(std::ceil((extent - size) / stride - kEdgeEps));
  };
  const std::size_t nx = steps(ex), ny = steps(ey);

  for (std::size_t ix = 0; ix < nx; ++ix) {
    for (std::size_t iy = 0; iy < ny; ++iy) {
      Block blk;
      blk.x0 = layout.room_lo[0] + static_cast<double>(ix) * stride;
      blk.y0 = layout.room_lo[1] + static_cast<double>(iy) * stride;
      for (std::size_t p = 0; p < room.size(); ++p) {
        const double x = room.x(p), y = room.y(p);
        if (x >= blk.x0 - kEdgeEps && x <= blk.x0 + size + kEdgeEps && y >= blk.y0 - kEdgeEps &&
            y <= blk.y0 + size + kEdgeEps)
          blk.points.push_back(p);
      }
      if (!blk.points.empty()) layout.blocks.push_back(std::move(blk));
    }
  }
  return layout;
}

std::vector<std::size_t> sample_block(const BlockLayout& layout, std::size_t b,
                                      std::size_t n_sample, Rng& rng) {
  const auto& pts = layout.blocks.at(b).points;
  if (n_sample == 0) throw std::invalid_argument("sample_block: n_sample must be positive");
  std::vector<std::size_t> out;
  out.reserve(n_sample);
  if (pts.size() >= n_sample) {
    std::vector<std::size_t> pool(pts);
    for (std::size_t i = 0; i < n_sample; ++i) {
      const std::size_t j = i + rng.index(pool.size() - i);
      std::swap(pool[i], pool[j]);
      out.push_back(pool[i]);
    }
  } else {
    for (std::size_t i = 0; i < n_sample; ++i) out.push_back(pts[rng.index(pts.size())]);
  }
  return out;
}

std::vector<std::int32_t> block_merge(const BlockLayout& layout,
                                      const std::vector<std::vector<std::int32_t>>& block_labels,
                                      std::size_t n_room, double merge_t) {
  if (block_labels.size() != layout.blocks.size())
    throw std::invalid_argument("block_merge: " + std::to_string(block_labels.size()) +
                                " labelings for " + std::to_string(layout.blocks.size()) +
                                " blocks");
  std::vector<std::int32_t> global(n_room, -1);
  std::int32_t next_id = 0;

  for (std::size_t b = 0; b < layout.blocks.size(); ++b) {
    const auto& pts = layout.blocks[b].points;
    const auto& labels = block_labels[b];
    if (labels.size() != pts.size())
      throw std::invalid_argument("block_merge: block " + std::to_string(b) + " has " +
                                  std::to_string(labels.size()) + " labels for " +
                                  std::to_string(pts.size()) + " points");

    std::int32_t max_local = -1;
    for (std::int32_t l : labels) max_local = std::max(max_local, l);
    for (std::int32_t g = 0; g <= max_local; ++g) {
      std::vector<std::size_t> members;
      for (std::size_t j = 0; j < labels.size(); ++j)
        if (labels[j] == g) members.push_back(pts[j]);
      if (members.empty()) continue;

      // Overlap counts against already-assigned global instances.
      std::map<std::int32_t, std::size_t> shared;
      std::size_t labeled_members = 0;
      for (std::size_t p : members) {
        if (global[p] < 0) continue;
        ++labeled_members;
        ++shared[global[p]];
      }
      std::int32_t target = -1;
      if (labeled_members > 0) {
        std::int32_t best_id = -1;
        std::size_t best_count = 0;
        for (const auto& [id, count] : shared) {  // std::map: ascending id, ties keep lower
          if (count > best_count) {
            best_count = count;
            best_id = id;
          }
        }
        std::size_t b_size = 0;  // points of this block currently labeled best_id
        for (std::size_t p : pts)
          if (global[p] == best_id) ++b_size;
        const std::size_t inter = shared[best_id];
        const std::size_t uni = labeled_members + b_size - inter;
        if (uni > 0 &&
            static_cast<double>(inter) / static_cast<double>(uni) >= merge_t)
          target = best_id;
      }
      if (target < 0) target = next_id++;
      for (std::size_t p : members) global[p] = target;
    }
  }
  return global;
}

}  // namespace protoseg
