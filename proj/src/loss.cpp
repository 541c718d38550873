#include "protoseg/loss.hpp"

#include <map>
#include <stdexcept>
#include <string>

namespace protoseg {

GroundTruth GroundTruth::from_labels(std::span<const std::int32_t> labels) {
  GroundTruth gt;
  gt.n_points = labels.size();
  std::map<std::int32_t, std::size_t> slot;
  for (std::int32_t v : labels) {
    if (v < -1) throw std::invalid_argument("ground truth: label " + std::to_string(v));
    if (v >= 0) slot.emplace(v, 0);
  }
  if (slot.empty()) throw std::invalid_argument("ground truth: no labeled instance");
  std::size_t next = 0;
  for (auto& [id, idx] : slot) idx = next++;

  gt.masks.assign(slot.size(), std::vector<double>(labels.size(), 0.0));
  gt.sizes.assign(slot.size(), 0);
  gt.point_instance.resize(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0) {
      gt.point_instance[i] = -1;
      continue;
    }
    const std::size_t idx = slot[labels[i]];
    gt.masks[idx][i] = 1.0;
    gt.sizes[idx]++;
    gt.point_instance[i] = static_cast<std::int32_t>(idx);
  }
  return gt;
}

namespace {

void check_scores(const Tensor& scores, const GroundTruth& gt) {
  if (scores.rank() != 2 || scores.cols() != gt.n_points)
    throw std::invalid_argument("loss: score matrix " + shape_string(scores.shape()) +
                                " does not cover " + std::to_string(gt.n_points) + " points");
  if (gt.count() == 0) throw std::invalid_argument("loss: empty ground truth");
}

Tensor row_tensor(const Tensor& scores, std::size_t row) {
  const std::size_t idx[1] = {row};
  return gather_rows(scores, idx);
}

Tensor mask_tensor(const GroundTruth& gt, std::size_t j) {
  return Tensor::from(gt.masks[j], {1, gt.n_points});
}

/// Index of the mask minimizing BCE against score row i (ties: lower j).
/// Evaluated with the same clamped kernel as the graph op, so the argmin
/// matches what the differentiable path would rank.
std::size_t best_mask_for_row(std::span<const double> row, const GroundTruth& gt) {
  std::size_t best = 0;
  double best_v = bce_value(row, gt.masks[0]);
  for (std::size_t j = 1; j < gt.count(); ++j) {
    const double v = bce_value(row, gt.masks[j]);
    if (v < best_v) {
      best_v = v;
      best = j;
    }
  }
  return best;
}

}  // namespace

Tensor loss_pr_to_gt_nearest(const Tensor& scores, const GroundTruth& gt) {
  check_scores(scores, gt);
  const std::size_t k = scores.rows(), n = gt.n_points;
  const auto v = scores.values();
  Tensor acc = Tensor::scalar(0.0);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = best_mask_for_row(v.subspan(i * n, n), gt);
    acc = add(acc, bce(row_tensor(scores, i), mask_tensor(gt, j)));
  }
  return acc;
}

Tensor loss_pr_to_gt(const Tensor& scores, const GroundTruth& gt,
                     std::span<const std::size_t> samples, std::size_t* skipped) {
  check_scores(scores, gt);
  if (samples.size() != scores.rows())
    throw std::invalid_argument("loss: " + std::to_string(samples.size()) +
                                " samples for " + std::to_string(scores.rows()) + " rows");
  std::size_t skip_count = 0;
  Tensor acc = Tensor::scalar(0.0);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const std::size_t s = samples[i];
    if (s >= gt.n_points)
      throw std::invalid_argument("loss: sample index " + std::to_string(s) + " out of range");
    const std::int32_t j = gt.point_instance[s];
    if (j < 0) {
      ++skip_count;
      continue;
    }
    acc = add(acc, bce(row_tensor(scores, i), mask_tensor(gt, static_cast<std::size_t>(j))));
  }
  if (skipped) *skipped = skip_count;
  return acc;
}

Tensor loss_gt_to_pr(const Tensor& scores, const GroundTruth& gt) {
  check_scores(scores, gt);
  const std::size_t k = scores.rows(), n = gt.n_points;
  const auto v = scores.values();
  Tensor acc = Tensor::scalar(0.0);
  for (std::size_t j = 0; j < gt.count(); ++j) {
    std::size_t best = 0;
    double best_v = bce_value(v.subspan(0, n), gt.masks[j]);
    for (std::size_t i = 1; i < k; ++i) {
      const double val = bce_value(v.subspan(i * n, n), gt.masks[j]);
      if (val < best_v) {  // ties keep the lower row
        best_v = val;
        best = i;
      }
    }
    acc = add(acc, bce(row_tensor(scores, best), mask_tensor(gt, j)));
  }
  return acc;
}

LossBreakdown reciprocal_loss(const Tensor& scores, const GroundTruth& gt,
                              std::span<const std::size_t> samples, const LossConfig& cfg) {
  if (cfg.lambda < 0.0) throw std::invalid_argument("loss: lambda must be >= 0");
  LossBreakdown out;
  out.j_pr_gt = cfg.use_spatial_matching
                    ? loss_pr_to_gt(scores, gt, samples, &out.skipped_samples)
                    : loss_pr_to_gt_nearest(scores, gt);
  out.j_gt_pr = cfg.use_gt_to_pr ? loss_gt_to_pr(scores, gt) : Tensor::scalar(0.0);
  out.total = add(out.j_pr_gt, scale(out.j_gt_pr, cfg.lambda));
  return out;
}

}  // namespace protoseg
