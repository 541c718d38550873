#include "protoseg/assembly.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "protoseg/metrics.hpp"

namespace protoseg {

MaskSet assemble(const Tensor& coeffs, const Tensor& prototypes,
                 std::span<const std::size_t> sample_origin) {
  if (coeffs.rank() != 2 || prototypes.rank() != 2 || coeffs.cols() != prototypes.cols())
    throw std::invalid_argument("assemble: prototype width mismatch, C " +
                                shape_string(coeffs.shape()) + " vs P " +
                                shape_string(prototypes.shape()));
  if (sample_origin.size() != coeffs.rows())
    throw std::invalid_argument("assemble: " + std::to_string(sample_origin.size()) +
                                " sample origins for " + std::to_string(coeffs.rows()) + " rows");
  MaskSet out;
  out.raw = matmul_nt(coeffs, prototypes);
  out.scores = sigmoid(out.raw);
  out.sample_origin.assign(sample_origin.begin(), sample_origin.end());
  return out;
}

std::vector<std::uint8_t> binarize(std::span<const double> row, double threshold) {
  if (threshold <= 0.0 || threshold >= 1.0)
    throw std::invalid_argument("binarize: threshold must lie in (0,1)");
  std::vector<std::uint8_t> out(row.size());
  for (std::size_t i = 0; i < row.size(); ++i) out[i] = row[i] > threshold ? 1 : 0;
  return out;
}

void nms(MaskSet& masks, double iou_threshold, double bin_threshold) {
  const std::size_t k = masks.k(), n = masks.n();
  const auto scores = masks.scores.values();

  std::vector<std::vector<std::uint8_t>> bin(k);
  std::vector<double> conf(k, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    bin[i] = binarize(scores.subspan(i * n, n), bin_threshold);
    double acc = 0.0;
    std::size_t count = 0;
    for (std::size_t j = 0; j < n; ++j)
      if (bin[i][j]) {
        acc += scores[i * n + j];
        ++count;
      }
    conf[i] = count ? acc / static_cast<double>(count) : 0.0;
  }

  std::vector<std::size_t> order(k);
  for (std::size_t i = 0; i < k; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (conf[a] != conf[b]) return conf[a] > conf[b];
    return masks.sample_origin[a] < masks.sample_origin[b];
  });

  masks.retained.clear();
  std::vector<char> alive(k, 1);
  for (std::size_t oi = 0; oi < k; ++oi) {
    const std::size_t i = order[oi];
    if (!alive[i]) continue;
    alive[i] = 0;
    const bool empty = std::find(bin[i].begin(), bin[i].end(), 1) == bin[i].end();
    if (empty) continue;
    masks.retained.push_back({i, conf[i]});
    for (std::size_t oj = oi + 1; oj < k; ++oj) {
      const std::size_t j = order[oj];
      if (alive[j] && iou(bin[i], bin[j]) >= iou_threshold) alive[j] = 0;
    }
  }
}

std::vector<std::int32_t> label_points(const MaskSet& masks, double bin_threshold) {
  const std::size_t n = masks.n();
  const auto scores = masks.scores.values();
  std::vector<std::int32_t> labels(n, -1);
  std::vector<double> best(n, -1.0);
  for (std::size_t rank = 0; rank < masks.retained.size(); ++rank) {
    const std::size_t row = masks.retained[rank].row;
    for (std::size_t j = 0; j < n; ++j) {
      const double s = scores[row * n + j];
      if (s > bin_threshold && s > best[j]) {  // strict: ties keep the earlier rank
        best[j] = s;
        labels[j] = static_cast<std::int32_t>(rank);
      }
    }
  }
  return labels;
}

std::vector<std::int32_t> attach_orphans(std::vector<std::int32_t> labels,
                                         const PointCloud& cloud) {
  const std::size_t n = cloud.size();
  if (labels.size() != n)
    throw std::invalid_argument("attach_orphans: " + std::to_string(labels.size()) +
                                " labels for " + std::to_string(n) + " points");
  std::vector<std::size_t> anchored;
  for (std::size_t i = 0; i < n; ++i)
    if (labels[i] >= 0) anchored.push_back(i);
  if (anchored.empty()) {
    std::fill(labels.begin(), labels.end(), 0);
    return labels;
  }

  const bool semantic = cloud.has_semantic();
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] >= 0) continue;
    double best_d = std::numeric_limits<double>::infinity();
    std::int32_t best_label = -1;
    bool best_same = false;
    for (std::size_t a : anchored) {
      const double dx = cloud.x(i) - cloud.x(a);
      const double dy = cloud.y(i) - cloud.y(a);
      const double dz = cloud.z(i) - cloud.z(a);
      const double d = dx * dx + dy * dy + dz * dz;
      const bool same = semantic && cloud.semantic[i] == cloud.semantic[a];
      // Same-class anchors beat different-class ones outright; within a
      // tier, nearer wins and equal distances go to the lower instance id.
      if (best_same && !same) continue;
      const bool better = (same && !best_same) || d < best_d ||
                          (d == best_d && labels[a] < best_label);
      if (better) {
        best_d = d;
        best_label = labels[a];
        best_same = same;
      }
    }
    labels[i] = best_label;
  }
  return labels;
}

}  // namespace protoseg
