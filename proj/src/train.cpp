#include "protoseg/train.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "json.hpp"
#include "protoseg/errors.hpp"

namespace protoseg {

TrainResult train_model(ProtoSegModel& model, const std::vector<PointCloud>& scenes,
                        const TrainOptions& opts) {
  if (scenes.empty()) throw std::invalid_argument("train: empty dataset");
  if (opts.batch == 0) throw std::invalid_argument("train: batch must be positive");

  // Ground truth and input frames are fixed per scene; build them once.
  std::vector<GroundTruth> gts;
  std::vector<InputContext> ctxs;
  gts.reserve(scenes.size());
  ctxs.reserve(scenes.size());
  for (const auto& scene : scenes) {
    if (!scene.has_instance()) throw std::invalid_argument("train: scene lacks instance labels");
    gts.push_back(GroundTruth::from_labels(scene.instance));
    ctxs.push_back(whole_cloud_context(scene));
  }

  // Block crops per scene, prepared the same way block inference prepares
  // its inputs (cycle-padded to the minimum usable size, block-corner frame).
  struct CropSet {
    std::vector<PointCloud> clouds;
    std::vector<InputContext> frames;
    std::vector<GroundTruth> gts;
  };
  std::vector<CropSet> crops(scenes.size());
  if (opts.block_crops) {
    const std::size_t min_points =
        std::max(model.cfg.k, model.cfg.knn_k * model.cfg.dilations.back());
    for (std::size_t si = 0; si < scenes.size(); ++si) {
      const BlockLayout layout = slice_blocks(scenes[si], opts.crop_size, opts.crop_stride);
      if (layout.blocks.size() < 2) continue;  // one block would repeat the whole scene
      for (std::size_t b = 0; b < layout.blocks.size(); ++b) {
        const auto& pts = layout.blocks[b].points;
        if (pts.size() * 2 < min_points) continue;  // mostly padding, not a useful sample
        std::vector<std::size_t> padded(pts);
        while (padded.size() < min_points) padded.push_back(pts[padded.size() % pts.size()]);
        PointCloud crop = scenes[si].subset(padded);
        if (std::none_of(crop.instance.begin(), crop.instance.end(),
                         [](std::int32_t lab) { return lab >= 0; }))
          continue;
        crops[si].gts.push_back(GroundTruth::from_labels(crop.instance));
        crops[si].frames.push_back(layout.context(b));
        crops[si].clouds.push_back(std::move(crop));
      }
    }
  }

  LossConfig loss_cfg;
  loss_cfg.lambda = model.cfg.lambda;
  loss_cfg.use_spatial_matching = model.cfg.use_spatial_matching;
  loss_cfg.use_gt_to_pr = model.cfg.use_gt_to_pr;

  std::vector<NamedTensor> params = model.parameters();
  AdamState adam;
  adam.lr = opts.lr;

  Rng shuffle_rng = Rng(opts.seed).fork(0x5f1e);
  TrainResult result;

  std::vector<std::size_t> order(scenes.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::size_t epoch = 0; epoch < opts.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[shuffle_rng.index(i)]);

    for (std::size_t begin = 0; begin < order.size(); begin += opts.batch) {
      const std::size_t end = std::min(begin + opts.batch, order.size());
      const double inv = 1.0 / static_cast<double>(end - begin);

      double batch_loss = 0.0, batch_pr = 0.0, batch_gtpr = 0.0;
      std::size_t batch_skipped = 0;
      const auto accumulate = [&](const PointCloud& cloud, const InputContext& frame,
                                  const GroundTruth& gt, double w) {
        ModelOutput out = model.forward(cloud, frame);
        LossBreakdown lb = reciprocal_loss(out.masks.scores, gt, out.samples, loss_cfg);
        batch_loss += lb.total.item() * w;
        batch_pr += lb.j_pr_gt.item() * w;
        batch_gtpr += lb.j_gt_pr.item() * w;
        batch_skipped += lb.skipped_samples;
        backward(scale(lb.total, w));
      };
      for (std::size_t bi = begin; bi < end; ++bi) {
        const std::size_t si = order[bi];
        accumulate(scenes[si], ctxs[si], gts[si], inv);
        const CropSet& cs = crops[si];
        if (cs.clouds.empty()) continue;
        const double cw = inv / static_cast<double>(cs.clouds.size());
        for (std::size_t c = 0; c < cs.clouds.size(); ++c)
          accumulate(cs.clouds[c], cs.frames[c], cs.gts[c], cw);
      }
      if (!std::isfinite(batch_loss))
        throw NumericError("train: non-finite loss at step " + std::to_string(result.steps) +
                           " (epoch " + std::to_string(epoch) + ")");
      adam_step(params, adam);
      result.steps += 1;
      result.final_loss = batch_loss;
      result.step_losses.push_back(batch_loss);
      if (opts.log) {
        nlohmann::json line{{"step", result.steps},
                            {"epoch", epoch},
                            {"loss", batch_loss},
                            {"j_pr_gt", batch_pr},
                            {"j_gt_pr", batch_gtpr},
                            {"skipped_samples", batch_skipped}};
        (*opts.log) << line.dump() << '\n';
      }
    }
  }
  return result;
}

}  // namespace protoseg
