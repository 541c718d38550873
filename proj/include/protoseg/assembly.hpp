#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "protoseg/cloud.hpp"
#include "protoseg/tensor.hpp"

namespace protoseg {

/// Overcomplete mask predictions: raw = C·P^T (K x N), scores = sigmoid(raw).
/// `retained` is filled by nms(); confidence is the mean score over the
/// mask's in-threshold points.
struct MaskSet {
  Tensor raw;
  Tensor scores;
  std::vector<std::size_t> sample_origin;

  struct Retained {
    std::size_t row;
    double confidence;
  };
  std::vector<Retained> retained;

  std::size_t k() const { return scores.rows(); }
  std::size_t n() const { return scores.cols(); }
};

MaskSet assemble(const Tensor& coeffs, const Tensor& prototypes,
                 std::span<const std::size_t> sample_origin);

/// Strict comparison: a point belongs iff score > threshold.
std::vector<std::uint8_t> binarize(std::span<const double> row, double threshold);

/// Greedy NMS over binarized masks. Candidates sort by confidence
/// descending (ties by lower sample_origin), each kept mask deletes every
/// candidate whose IoU with it reaches iou_threshold; empty masks are
/// never retained. Fills masks.retained.
void nms(MaskSet& masks, double iou_threshold, double bin_threshold);

/// Point -> instance id (the retained rank), or -1 when no retained mask
/// covers the point. A point under several retained masks goes to the one
/// scoring it highest, ties to the earlier rank.
std::vector<std::int32_t> label_points(const MaskSet& masks, double bin_threshold);

/// Assign each -1 point to the instance of its nearest labeled point with
/// the same semantic class, falling back to the globally nearest labeled
/// point; distance ties go to the lower instance id. With no labeled
/// points at all, everything becomes one fallback instance 0.
std::vector<std::int32_t> attach_orphans(std::vector<std::int32_t> labels,
                                         const PointCloud& cloud);

}  // namespace protoseg
