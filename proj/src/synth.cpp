#include "protoseg/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "protoseg/rng.hpp"

namespace protoseg {

namespace {

enum Kind : std::int32_t { kBox = 0, kSphere = 1, kPlane = 2 };

struct Primitive {
  Kind kind;
  double center[3];
  double half[3];  // box half-extents / {r,r,r} / {a,b,0}
  double bound;    // bounding-sphere radius
  double color[3];

  double area() const {
    switch (kind) {
      case kBox:
        return 8.0 * (half[0] * half[1] + half[1] * half[2] + half[0] * half[2]);
      case kSphere:
        return 4.0 * 3.14159265358979323846 * half[0] * half[0];
      case kPlane:
        return 4.0 * half[0] * half[1];
    }
    return 0.0;
  }
};

double norm3(const double v[3]) {
  return std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
}

Primitive make_primitive(Kind kind, double extent, double scale, Rng& rng) {
  Primitive p{};
  p.kind = kind;
  switch (kind) {
    case kBox:
      for (int c = 0; c < 3; ++c) p.half[c] = rng.uniform(0.08, 0.14) * extent * scale;
      break;
    case kSphere: {
      const double r = rng.uniform(0.08, 0.14) * extent * scale;
      p.half[0] = p.half[1] = p.half[2] = r;
      break;
    }
    case kPlane:
      p.half[0] = rng.uniform(0.10, 0.18) * extent * scale;
      p.half[1] = rng.uniform(0.10, 0.18) * extent * scale;
      p.half[2] = 0.0;
      break;
  }
  p.bound = kind == kSphere ? p.half[0] : norm3(p.half);
  for (int c = 0; c < 3; ++c) p.color[c] = rng.uniform(0.1, 0.9);
  return p;
}

void sample_surface(const Primitive& p, Rng& rng, double out[3]) {
  switch (p.kind) {
    case kSphere: {
      double d[3];
      double n = 0.0;
      do {
        for (int c = 0; c < 3; ++c) d[c] = rng.normal();
        n = norm3(d);
      } while (n < 1e-12);
      for (int c = 0; c < 3; ++c) out[c] = p.center[c] + p.half[0] * d[c] / n;
      return;
    }
    case kBox: {
      const double ax = p.half[1] * p.half[2];  // area of an x-normal face / 4
      const double ay = p.half[0] * p.half[2];
      const double az = p.half[0] * p.half[1];
      const double pick = rng.uniform() * 2.0 * (ax + ay + az);
      int axis;
      double acc = 2.0 * ax;
      if (pick < acc)
        axis = 0;
      else if (pick < acc + 2.0 * ay)
        axis = 1;
      else
        axis = 2;
      const double side = rng.uniform() < 0.5 ? -1.0 : 1.0;
      for (int c = 0; c < 3; ++c)
        out[c] = p.center[c] + (c == axis ? side * p.half[c]
                                          : rng.uniform(-p.half[c], p.half[c]));
      return;
    }
    case kPlane:
      out[0] = p.center[0] + rng.uniform(-p.half[0], p.half[0]);
      out[1] = p.center[1] + rng.uniform(-p.half[1], p.half[1]);
      out[2] = p.center[2];
      return;
  }
}

}  // namespace

PointCloud generate_scene(const SynthConfig& cfg, std::uint64_t scene_index) {
  if (cfg.min_instances == 0 || cfg.min_instances > cfg.max_instances)
    throw std::invalid_argument("synth: bad instance range [" +
                                std::to_string(cfg.min_instances) + ", " +
                                std::to_string(cfg.max_instances) + "]");
  if (cfg.extent_min <= 0.0 || cfg.extent_min > cfg.extent_max)
    throw std::invalid_argument("synth: bad extent range");
  if (cfg.noise_sigma < 0.0) throw std::invalid_argument("synth: negative noise");
  std::vector<Kind> kinds;
  if (cfg.use_boxes) kinds.push_back(kBox);
  if (cfg.use_spheres) kinds.push_back(kSphere);
  if (cfg.use_planes) kinds.push_back(kPlane);
  if (kinds.empty()) throw std::invalid_argument("synth: empty shape set");

  Rng rng(mix_seed(cfg.seed, scene_index));
  const std::size_t n_inst =
      cfg.min_instances + rng.index(cfg.max_instances - cfg.min_instances + 1);
  if (cfg.n_points < n_inst)
    throw std::invalid_argument("synth: " + std::to_string(cfg.n_points) +
                                " points cannot cover " + std::to_string(n_inst) + " instances");
  const double extent = rng.uniform(cfg.extent_min, cfg.extent_max);

  // Place primitives with non-overlapping bounding spheres. Sizes shrink
  // with the instance count, and a failed packing retries the whole scene
  // with everything drawn smaller, so dense scenes stay well separated
  // instead of erroring out.
  std::vector<Primitive> prims;
  double scale = std::cbrt(2.0 / static_cast<double>(n_inst));
  for (int round = 0;; ++round) {
    prims.clear();
    bool scene_ok = true;
    for (std::size_t i = 0; i < n_inst && scene_ok; ++i) {
      Primitive p = make_primitive(kinds[rng.index(kinds.size())], extent, scale, rng);
      bool placed = false;
      for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
        const double margin = p.bound + 3.0 * cfg.noise_sigma;
        const double lo = std::min(margin, extent * 0.5);
        const double hi = std::max(extent - margin, extent * 0.5);
        for (int c = 0; c < 3; ++c) p.center[c] = rng.uniform(lo, hi);
        placed = true;
        if (cfg.allow_overlap) break;
        for (const auto& q : prims) {
          double d[3] = {p.center[0] - q.center[0], p.center[1] - q.center[1],
                         p.center[2] - q.center[2]};
          if (norm3(d) < 1.25 * (p.bound + q.bound)) {
            placed = false;
            break;
          }
        }
      }
      if (placed)
        prims.push_back(p);
      else
        scene_ok = false;
    }
    if (scene_ok) break;
    if (round == 6)
      throw std::runtime_error("synth: cannot place " + std::to_string(n_inst) +
                               " instances without overlap; reduce the count or sizes");
    scale *= 0.7;
  }

  // Split the point budget proportionally to surface area.
  std::vector<std::size_t> budget(n_inst, 0);
  {
    double total = 0.0;
    for (const auto& p : prims) total += p.area();
    std::vector<std::pair<double, std::size_t>> frac;
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < n_inst; ++i) {
      const double exact = static_cast<double>(cfg.n_points) * prims[i].area() / total;
      budget[i] = static_cast<std::size_t>(exact);
      assigned += budget[i];
      frac.emplace_back(exact - std::floor(exact), i);
    }
    std::sort(frac.begin(), frac.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;
    });
    for (std::size_t r = 0; assigned < cfg.n_points; ++r, ++assigned) budget[frac[r % n_inst].second]++;
    for (std::size_t i = 0; i < n_inst; ++i) {
      while (budget[i] == 0) {
        const std::size_t big =
            static_cast<std::size_t>(std::max_element(budget.begin(), budget.end()) - budget.begin());
        budget[big]--;
        budget[i]++;
      }
    }
  }

  PointCloud cloud;
  cloud.channels = 6;
  cloud.data.reserve(cfg.n_points * 6);
  cloud.instance.reserve(cfg.n_points);
  cloud.semantic.reserve(cfg.n_points);
  for (std::size_t i = 0; i < n_inst; ++i) {
    const auto& p = prims[i];
    for (std::size_t j = 0; j < budget[i]; ++j) {
      double pos[3];
      sample_surface(p, rng, pos);
      for (int c = 0; c < 3; ++c) cloud.data.push_back(pos[c] + cfg.noise_sigma * rng.normal());
      for (int c = 0; c < 3; ++c)
        cloud.data.push_back(std::clamp(p.color[c] + 0.02 * rng.normal(), 0.0, 1.0));
      cloud.instance.push_back(static_cast<std::int32_t>(i));
      cloud.semantic.push_back(static_cast<std::int32_t>(p.kind));
    }
  }

  // Shuffle so point order carries no instance structure.
  const std::size_t n = cloud.size();
  for (std::size_t i = n - 1; i > 0; --i) {
    const std::size_t j = rng.index(i + 1);
    for (std::size_t c = 0; c < 6; ++c) std::swap(cloud.data[i * 6 + c], cloud.data[j * 6 + c]);
    std::swap(cloud.instance[i], cloud.instance[j]);
    std::swap(cloud.semantic[i], cloud.semantic[j]);
  }
  return cloud;
}

}  // namespace protoseg
