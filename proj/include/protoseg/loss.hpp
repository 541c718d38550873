#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "protoseg/tensor.hpp"

namespace protoseg {

/// Ground-truth instance masks derived from per-point labels. Mask order
/// follows ascending original instance id; point_instance maps each point
/// to its mask index (-1 = unlabeled).
struct GroundTruth {
  std::size_t n_points = 0;
  std::vector<std::vector<double>> masks;  // I_GT rows of N zeros/ones
  std::vector<std::size_t> sizes;
  std::vector<std::int32_t> point_instance;

  std::size_t count() const { return masks.size(); }

  static GroundTruth from_labels(std::span<const std::int32_t> labels);
};

struct LossConfig {
  double lambda = 1.0;
  bool use_spatial_matching = true;  // false: nearest-GT baseline matching
  bool use_gt_to_pr = true;
};

/// Baseline prediction->GT term: every prediction row against its
/// lowest-BCE ground-truth mask, summed over rows (each BCE is a mean over
/// the N points).
Tensor loss_pr_to_gt_nearest(const Tensor& scores, const GroundTruth& gt);

/// Spatially matched prediction->GT term: each row is trained against the
/// mask of the instance containing its originating sampled point; rows
/// whose sample is unlabeled are skipped and counted into *skipped.
Tensor loss_pr_to_gt(const Tensor& scores, const GroundTruth& gt,
                     std::span<const std::size_t> samples, std::size_t* skipped = nullptr);

/// Coverage term: every GT mask against its lowest-BCE prediction row.
Tensor loss_gt_to_pr(const Tensor& scores, const GroundTruth& gt);

struct LossBreakdown {
  Tensor total;
  Tensor j_pr_gt;
  Tensor j_gt_pr;
  std::size_t skipped_samples = 0;
};

/// total = j_pr_gt + lambda * j_gt_pr, with each term selected by the
/// config toggles (a disabled coverage term contributes exactly zero).
LossBreakdown reciprocal_loss(const Tensor& scores, const GroundTruth& gt,
                              std::span<const std::size_t> samples, const LossConfig& cfg);

}  // namespace protoseg
