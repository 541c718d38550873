#pragma once

#include <cstdint>

#include "protoseg/cloud.hpp"

namespace protoseg {

/// Synthetic scene generator config. Scenes hold axis-aligned primitives
/// (box=0, sphere=1, plane=2 as semantic classes) with surface-sampled
/// points, Gaussian jitter, a per-instance base color (channels 3..5), and
/// full instance/semantic labels. The scene extent is drawn uniformly from
/// [extent_min, extent_max] so one model generalizes from sub-meter blocks
/// to room-sized clouds; set the two equal for a fixed extent.
struct SynthConfig {
  std::uint64_t seed = 0;
  std::size_t n_points = 1024;
  std::size_t min_instances = 2;
  std::size_t max_instances = 10;
  bool use_boxes = true;
  bool use_spheres = true;
  bool use_planes = true;
  double noise_sigma = 0.005;
  double extent_min = 1.0;
  double extent_max = 2.5;
  bool allow_overlap = false;
};

/// Deterministic: the same (cfg, scene_index) yields bit-identical clouds.
/// Throws when primitives cannot be placed without overlap after bounded
/// retries.
PointCloud generate_scene(const SynthConfig& cfg, std::uint64_t scene_index);

}  // namespace protoseg
