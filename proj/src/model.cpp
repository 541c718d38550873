#include "protoseg/model.hpp"

#include <algorithm>
#include <chrono>
#include <stdexcept>

#include "json.hpp"
#include "protoseg/checkpoint.hpp"
#include "protoseg/errors.hpp"
#include "protoseg/geometry.hpp"

namespace protoseg {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

}  // namespace

void RunConfig::validate() const {
  if (m == 0 || f == 0 || k == 0 || knn_k == 0)
    throw std::invalid_argument("config: m, f, k, knn_k must be positive");
  if (sampling != "features" && sampling != "coordinates")
    throw std::invalid_argument("config: sampling must be 'features' or 'coordinates', got '" +
                                sampling + "'");
  if (threshold <= 0.0 || threshold >= 1.0)
    throw std::invalid_argument("config: threshold must lie in (0,1)");
  if (nms_iou <= 0.0 || nms_iou > 1.0)
    throw std::invalid_argument("config: nms_iou must lie in (0,1]");
  if (lambda < 0.0) throw std::invalid_argument("config: lambda must be >= 0");
  if (lr <= 0.0) throw std::invalid_argument("config: lr must be positive");
  if (batch == 0) throw std::invalid_argument("config: batch must be positive");
  if (in_channels < 3) throw std::invalid_argument("config: in_channels must be >= 3");
  DpiConfig dpi;
  dpi.dilations = dilations;
  dpi.k = knn_k;
  dpi.validate();
}

std::string RunConfig::to_json() const {
  nlohmann::json j{{"m", m},
                   {"f", f},
                   {"k", k},
                   {"sampling", sampling},
                   {"threshold", threshold},
                   {"nms_iou", nms_iou},
                   {"dilations", dilations},
                   {"knn_k", knn_k},
                   {"lambda", lambda},
                   {"lr", lr},
                   {"batch", batch},
                   {"epochs", epochs},
                   {"in_channels", in_channels},
                   {"seed", seed},
                   {"use_spatial_matching", use_spatial_matching},
                   {"use_gt_to_pr", use_gt_to_pr},
                   {"attach_orphans", attach_orphans}};
  return j.dump();
}

RunConfig RunConfig::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("config: ") + e.what());
  }
  RunConfig cfg;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "m") value.get_to(cfg.m);
      else if (key == "f") value.get_to(cfg.f);
      else if (key == "k") value.get_to(cfg.k);
      else if (key == "sampling") value.get_to(cfg.sampling);
      else if (key == "threshold") value.get_to(cfg.threshold);
      else if (key == "nms_iou") value.get_to(cfg.nms_iou);
      else if (key == "dilations") value.get_to(cfg.dilations);
      else if (key == "knn_k") value.get_to(cfg.knn_k);
      else if (key == "lambda") value.get_to(cfg.lambda);
      else if (key == "lr") value.get_to(cfg.lr);
      else if (key == "batch") value.get_to(cfg.batch);
      else if (key == "epochs") value.get_to(cfg.epochs);
      else if (key == "in_channels") value.get_to(cfg.in_channels);
      else if (key == "seed") value.get_to(cfg.seed);
      else if (key == "use_spatial_matching") value.get_to(cfg.use_spatial_matching);
      else if (key == "use_gt_to_pr") value.get_to(cfg.use_gt_to_pr);
      else if (key == "attach_orphans") value.get_to(cfg.attach_orphans);
      else throw FormatError("config: unknown key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

Tensor build_input(const PointCloud& cloud, const InputContext& ctx) {
  const std::size_t n = cloud.size(), ch = cloud.channels;
  std::vector<double> values;
  values.reserve(n * (ch + 3));
  for (std::size_t i = 0; i < n; ++i) {
    const double* p = cloud.point(i);
    for (int c = 0; c < 3; ++c) values.push_back(p[c] - ctx.corner[c]);
    for (std::size_t c = 3; c < ch; ++c) values.push_back(p[c]);
    for (int c = 0; c < 3; ++c) {
      const double extent = ctx.room_hi[c] - ctx.room_lo[c];
      values.push_back(extent > 0.0 ? (p[c] - ctx.room_lo[c]) / extent : 0.0);
    }
  }
  return Tensor::from(std::move(values), {n, ch + 3});
}

ProtoSegModel::ProtoSegModel(RunConfig cfg_) : cfg(std::move(cfg_)) {
  cfg.validate();
  Rng rng = Rng(cfg.seed).fork(0x1a1e5);
  DpiConfig dpi;
  dpi.dilations = cfg.dilations;
  dpi.k = cfg.knn_k;
  backbone = Backbone(cfg.in_channels + 3, cfg.f, rng);
  proto = ProtoScoreNet(cfg.f, cfg.m, rng);
  coeff = CoeffNet(dpi, cfg.f, cfg.m, rng);
}

std::vector<NamedTensor> ProtoSegModel::parameters() const {
  std::vector<NamedTensor> out;
  backbone.collect(out);
  proto.collect(out);
  coeff.collect(out);
  return out;
}

ModelOutput ProtoSegModel::forward(const PointCloud& cloud, const InputContext& ctx) const {
  const std::size_t n = cloud.size();
  if (cloud.channels != cfg.in_channels)
    throw std::invalid_argument("model: cloud has " + std::to_string(cloud.channels) +
                                " channels, config expects " + std::to_string(cfg.in_channels));
  if (n < cfg.k)
    throw std::invalid_argument("model: scene has N=" + std::to_string(n) +
                                " points, fewer than K=" + std::to_string(cfg.k) +
                                " samples; rerun with a smaller K");
  const std::size_t k_base = cfg.knn_k * cfg.dilations.back();
  if (n < k_base)
    throw std::invalid_argument("model: scene has N=" + std::to_string(n) +
                                " points but the neighbor index needs k_base=" +
                                std::to_string(k_base) + "; reduce knn_k or the dilations");

  ModelOutput out;
  const OpStats ops0 = op_stats();

  auto t0 = Clock::now();
  out.input = build_input(cloud, ctx);
  out.feats = backbone(out.input);
  out.times.feature_ms = ms_since(t0);

  std::vector<double> coords(n * 3);
  for (std::size_t i = 0; i < n; ++i)
    for (int c = 0; c < 3; ++c) coords[i * 3 + c] = cloud.point(i)[c];

  t0 = Clock::now();
  if (cfg.sampling == "features") {
    out.samples = fps(out.feats.values(), cfg.f, cfg.k, 0, SampleSpace::features).indices;
  } else {
    out.samples = fps(coords, 3, cfg.k, 0, SampleSpace::coordinates).indices;
  }
  out.times.sample_ms = ms_since(t0);

  t0 = Clock::now();
  const NeighborIndex nbrs = knn(coords, n, coords, n, 3, k_base);
  out.coeffs = coeff(out.samples, nbrs, out.feats, coords);
  out.times.coeff_ms = ms_since(t0);

  t0 = Clock::now();
  out.prototypes = proto(out.feats);
  out.times.proto_ms = ms_since(t0);

  t0 = Clock::now();
  out.masks = assemble(out.coeffs, out.prototypes, out.samples);
  out.times.assemble_ms = ms_since(t0);

  out.pre_nms_ops = op_stats() - ops0;
  out.times.total_ms = out.times.feature_ms + out.times.sample_ms + out.times.coeff_ms +
                       out.times.proto_ms + out.times.assemble_ms;
  return out;
}

InferenceResult ProtoSegModel::infer(const PointCloud& cloud) const {
  return infer(cloud, whole_cloud_context(cloud));
}

InferenceResult ProtoSegModel::infer(const PointCloud& cloud, const InputContext& ctx) const {
  InferenceResult res;
  res.out = forward(cloud, ctx);
  auto t0 = Clock::now();
  nms(res.out.masks, cfg.nms_iou, cfg.threshold);
  res.labels = label_points(res.out.masks, cfg.threshold);
  if (cfg.attach_orphans) res.labels = protoseg::attach_orphans(std::move(res.labels), cloud);
  res.out.times.nms_ms = ms_since(t0);
  res.out.times.total_ms += res.out.times.nms_ms;
  return res;
}

void ProtoSegModel::save(const std::string& path) const {
  std::vector<NamedTensor> tensors = parameters();
  const std::string meta = cfg.to_json();
  std::vector<double> chars(meta.begin(), meta.end());
  tensors.emplace_back("meta.config_json", Tensor::from(std::move(chars), {meta.size()}));
  save_checkpoint(path, tensors);
}

RunConfig checkpoint_config(const std::string& path) {
  const std::vector<NamedTensor> tensors = load_checkpoint(path);
  const Tensor* meta = find_tensor(tensors, "meta.config_json");
  if (!meta) throw FormatError(path + ": not a model checkpoint (missing meta.config_json)");
  std::string text;
  text.reserve(meta->size());
  for (double v : meta->values()) {
    if (v < 1.0 || v > 127.0) throw FormatError(path + ": corrupt embedded config");
    text.push_back(static_cast<char>(v));
  }
  return RunConfig::from_json(text);
}

ProtoSegModel ProtoSegModel::load(const std::string& path) {
  return load(path, checkpoint_config(path));
}

ProtoSegModel ProtoSegModel::load(const std::string& path, const RunConfig& override_cfg) {
  const std::vector<NamedTensor> tensors = load_checkpoint(path);
  ProtoSegModel model(override_cfg);
  load_into(model.parameters(), tensors);
  return model;
}

std::vector<std::int32_t> infer_room_blocks(const ProtoSegModel& model, const PointCloud& room,
                                            double size, double stride, double merge_t) {
  const BlockLayout layout = slice_blocks(room, size, stride);
  std::vector<std::vector<std::int32_t>> block_labels;
  block_labels.reserve(layout.blocks.size());
  const std::size_t min_points =
      std::max(model.cfg.k, model.cfg.knn_k * model.cfg.dilations.back());
  for (std::size_t b = 0; b < layout.blocks.size(); ++b) {
    const auto& pts = layout.blocks[b].points;
    std::vector<std::size_t> padded(pts);
    while (padded.size() < min_points) padded.push_back(pts[padded.size() % pts.size()]);
    const PointCloud block = room.subset(padded);
    const InferenceResult res = model.infer(block, layout.context(b));
    block_labels.emplace_back(res.labels.begin(),
                              res.labels.begin() + static_cast<std::ptrdiff_t>(pts.size()));
  }
  std::vector<std::int32_t> merged =
      block_merge(layout, block_labels, room.size(), merge_t);
  if (model.cfg.attach_orphans) merged = attach_orphans(std::move(merged), room);
  return merged;
}

}  // namespace protoseg
