#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "protoseg/assembly.hpp"
#include "protoseg/backbone.hpp"
#include "protoseg/blocks.hpp"
#include "protoseg/cloud.hpp"
#include "protoseg/coeffnet.hpp"
#include "protoseg/metrics.hpp"
#include "protoseg/protoscore.hpp"
#include "protoseg/rng.hpp"

namespace protoseg {

/// Every knob of a run. Serialized verbatim into checkpoints and reports.
struct RunConfig {
  std::size_t m = 128;                          // prototypes
  std::size_t f = 64;                           // feature width
  std::size_t k = 64;                           // sampled points
  std::string sampling = "features";            // "features" | "coordinates"
  double threshold = 0.3;                       // mask binarization, strict >
  double nms_iou = 0.5;
  std::vector<std::size_t> dilations{1, 2, 4, 8};
  std::size_t knn_k = 16;                       // neighbors per branch
  double lambda = 1.0;
  double lr = 0.001;
  std::size_t batch = 16;
  std::size_t epochs = 20;
  std::size_t in_channels = 6;                  // file channels; +3 room-location inside
  std::uint64_t seed = kDefaultSeed;
  bool use_spatial_matching = true;
  bool use_gt_to_pr = true;
  bool attach_orphans = true;

  void validate() const;
  std::string to_json() const;
  static RunConfig from_json(const std::string& text);
};

/// One staged forward pass: everything up to (not including) NMS.
struct ModelOutput {
  Tensor input;
  Tensor feats;
  Tensor prototypes;
  Tensor coeffs;
  MaskSet masks;
  std::vector<std::size_t> samples;
  StageTimes times;
  OpStats pre_nms_ops;
};

struct InferenceResult {
  ModelOutput out;
  std::vector<std::int32_t> labels;
};

/// Cloud -> N x (I+3) network input: XYZ shifted to ctx.corner, the file's
/// extra channels unscaled, then the point's normalized room location.
Tensor build_input(const PointCloud& cloud, const InputContext& ctx);

class ProtoSegModel {
 public:
  RunConfig cfg;
  Backbone backbone;
  ProtoScoreNet proto;
  CoeffNet coeff;

  explicit ProtoSegModel(RunConfig cfg);

  std::vector<NamedTensor> parameters() const;

  ModelOutput forward(const PointCloud& cloud, const InputContext& ctx) const;

  InferenceResult infer(const PointCloud& cloud) const;
  InferenceResult infer(const PointCloud& cloud, const InputContext& ctx) const;

  void save(const std::string& path) const;
  static ProtoSegModel load(const std::string& path);
  /// Load weights under a caller-supplied config; shapes must still match.
  static ProtoSegModel load(const std::string& path, const RunConfig& override_cfg);
};

/// Just the config embedded in a checkpoint, without building the model.
RunConfig checkpoint_config(const std::string& path);

/// Block-based room processing: slice into overlapping blocks, infer each
/// (cycling indices up to K when a block is small), merge, then attach
/// leftover unlabeled points if the config says so.
std::vector<std::int32_t> infer_room_blocks(const ProtoSegModel& model, const PointCloud& room,
                                            double size = 1.0, double stride = 0.5,
                                            double merge_t = 0.5);

}  // namespace protoseg
