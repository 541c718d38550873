#include "protoseg/bench.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "json.hpp"

namespace protoseg {

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  size_t mid = v.size() / 2;
  if (v.size() % 2 == 1) return v[mid];
  return 0.5 * (v[mid - 1] + v[mid]);
}

StageStats stage_stats(std::vector<double> per_scene) {
  StageStats s;
  if (per_scene.empty()) return s;
  double sum = 0.0;
  for (double x : per_scene) sum += x;
  s.mean_ms = sum / static_cast<double>(per_scene.size());
  double var = 0.0;
  for (double x : per_scene) {
    double d = x - s.mean_ms;
    var += d * d;
  }
  var /= static_cast<double>(per_scene.size());
  s.std_ms = std::sqrt(var);
  s.median_ms = median(std::move(per_scene));
  return s;
}

double BenchReport::cv() const {
  StageStats s = stage_stats(scene_total_ms);
  if (s.mean_ms <= 0.0) return 0.0;
  return s.std_ms / s.mean_ms;
}

std::string BenchReport::to_json() const {
  nlohmann::json j;
  j["scenes"] = scenes;
  j["reps"] = reps;
  auto stage = [](const StageStats& s) {
    return nlohmann::json{{"mean_ms", s.mean_ms},
                {"std_ms", s.std_ms},
                {"median_ms", s.median_ms}};
  };
  j["stages"] = {
    {"feature", stage(feature)},   {"sample", stage(sample)},
    {"coeff", stage(coeff)},       {"proto", stage(proto)},
    {"assemble", stage(assemble)}, {"nms", stage(nms)},
  };
  j["table"] = {
    {"network_ms", stage(network)},
    {"nms_ms", stage(nms)},
    {"total_ms", stage(total)},
  };
  j["cv_total"] = cv();
  j["scene_total_ms"] = scene_total_ms;
  return j.dump(2);
}

BenchReport bench_model(ProtoSegModel& model, std::span<const PointCloud> scenes,
            size_t reps, size_t warmup) {
  if (scenes.empty()) throw std::invalid_argument("bench: no scenes");
  if (reps == 0) throw std::invalid_argument("bench: reps must be positive");

  BenchReport report;
  report.scenes = scenes.size();
  report.reps = reps;

  std::vector<double> feature, sample, coeff, proto, assemble, nms, network, total;
  for (const PointCloud& cloud : scenes) {
    for (size_t w = 0; w < warmup; ++w) (void)model.infer(cloud);

    std::vector<double> f, s, c, p, a, n, t;
    for (size_t r = 0; r < reps; ++r) {
      InferenceResult res = model.infer(cloud);
      const StageTimes& st = res.out.times;
      f.push_back(st.feature_ms);
      s.push_back(st.sample_ms);
      c.push_back(st.coeff_ms);
      p.push_back(st.proto_ms);
      a.push_back(st.assemble_ms);
      n.push_back(st.nms_ms);
      t.push_back(st.total_ms);
    }
    feature.push_back(median(std::move(f)));
    sample.push_back(median(std::move(s)));
    coeff.push_back(median(std::move(c)));
    proto.push_back(median(std::move(p)));
    assemble.push_back(median(std::move(a)));
    nms.push_back(median(std::move(n)));
    double tm = median(std::move(t));
    total.push_back(tm);
    double nm = nms.back();
    network.push_back(tm - nm);
  }

  report.scene_total_ms = total;
  report.feature = stage_stats(std::move(feature));
  report.sample = stage_stats(std::move(sample));
  report.coeff = stage_stats(std::move(coeff));
  report.proto = stage_stats(std::move(proto));
  report.assemble = stage_stats(std::move(assemble));
  report.nms = stage_stats(std::move(nms));
  report.network = stage_stats(std::move(network));
  report.total = stage_stats(std::move(total));
  return report;
}

}  // namespace protoseg
