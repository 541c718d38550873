#pragma once

#include <ostream>
#include <vector>

#include "protoseg/loss.hpp"
#include "protoseg/model.hpp"

namespace protoseg {

struct TrainOptions {
  std::size_t epochs = 1;
  std::size_t batch = 16;
  double lr = 0.001;
  std::uint64_t seed = kDefaultSeed;  // governs epoch shuffling only
  std::ostream* log = nullptr;        // one JSON line per optimizer step
  bool block_crops = true;            // also fit each scene's block crops
  double crop_size = 1.0;
  double crop_stride = 1.0;
};

struct TrainResult {
  std::size_t steps = 0;
  double final_loss = 0.0;
  std::vector<double> step_losses;
};

/// Gradient-accumulating training loop: scenes are shuffled per epoch,
/// grouped into batches, each batch averaged into one Adam step. A non-finite
/// loss aborts with NumericError naming the step. With block_crops on, each
/// scene's term is its whole-scene loss plus the mean loss over its block
/// crops, prepared exactly as block inference prepares them, so the model
/// also sees the small single-object populations blocks produce.
TrainResult train_model(ProtoSegModel& model, const std::vector<PointCloud>& scenes,
                        const TrainOptions& opts);

}  // namespace protoseg
