#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace protoseg {

/// Intersection over union of two binary masks; two empty masks give 0.
double iou(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b);

/// Binary mask tagged with a semantic class.
struct ClassMask {
  std::vector<std::uint8_t> mask;
  std::int32_t cls = 0;
};

struct Coverage {
  double mcov = 0.0;
  double mwcov = 0.0;
};

/// mCov: mean over GT masks of the best IoU any prediction achieves;
/// mWCov: the same with each GT weighted by its point-count share.
Coverage coverage_metrics(std::span<const ClassMask> pred, std::span<const ClassMask> gt);

struct PrecRec {
  double mprec = 0.0;
  double mrec = 0.0;
};

/// Greedy one-to-one matching by descending IoU at threshold iou_t,
/// computed per semantic class; mPrec averages precision over classes with
/// predictions, mRec averages recall over classes with ground truth.
PrecRec prec_rec(std::span<const ClassMask> pred, std::span<const ClassMask> gt,
                 double iou_t = 0.5);

struct Detection {
  std::vector<std::uint8_t> mask;
  double confidence = 0.0;
  std::int32_t category = 0;
  std::size_t scene = 0;
};

struct GtInstance {
  std::vector<std::uint8_t> mask;
  std::int32_t category = 0;
  std::size_t scene = 0;
};

/// Mean average precision at the given IoU threshold: detections ranked by
/// confidence per category, matched greedily one-to-one within their
/// scene, precision interpolated from the right (all-point AP). Categories
/// with zero ground truth are excluded from the mean.
double map50(std::span<const Detection> detections, std::span<const GtInstance> gt,
             double iou_t = 0.5);

/// Per-stage wall-clock milliseconds of one inference pass.
struct StageTimes {
  double feature_ms = 0.0;
  double sample_ms = 0.0;
  double coeff_ms = 0.0;
  double proto_ms = 0.0;
  double assemble_ms = 0.0;
  double nms_ms = 0.0;
  double total_ms = 0.0;

  double network_ms() const { return total_ms - nms_ms; }
};

struct SceneMetrics {
  double mcov = 0.0;
  double mwcov = 0.0;
  double mprec = 0.0;
  double mrec = 0.0;
};

struct SceneReport {
  std::string scene_id;
  SceneMetrics metrics;
  std::size_t pred_instances = 0;
  std::size_t gt_instances = 0;
  StageTimes timings;
};

/// Instance labeling -> one binary mask per id (ids remapped to ascending
/// order), tagged with the majority semantic class of the mask's points.
std::vector<ClassMask> masks_from_labels(std::span<const std::int32_t> instance,
                                         std::span<const std::int32_t> semantic);

}  // namespace protoseg
