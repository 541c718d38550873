#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "protoseg/metrics.hpp"
#include "protoseg/model.hpp"

namespace protoseg {

struct StageStats {
    double mean_ms = 0.0;
    double std_ms = 0.0;
    double median_ms = 0.0;
};

// Timing report over a set of scenes. Each scene is measured `reps` times
// after `warmup` untimed runs; the per-scene value for a stage is the median
// over reps, and the aggregate stats are taken across scenes.
struct BenchReport {
    size_t scenes = 0;
    size_t reps = 0;
    StageStats feature;
    StageStats sample;
    StageStats coeff;
    StageStats proto;
    StageStats assemble;
    StageStats nms;
    StageStats network;
    StageStats total;
    std::vector<double> scene_total_ms;  // per-scene median totals

    // Coefficient of variation of the per-scene total medians.
    double cv() const;
    std::string to_json() const;
};

double median(std::vector<double> v);
StageStats stage_stats(std::vector<double> per_scene);

BenchReport bench_model(ProtoSegModel& model, std::span<const PointCloud> scenes,
                        size_t reps = 5, size_t warmup = 2);

}  // namespace protoseg
