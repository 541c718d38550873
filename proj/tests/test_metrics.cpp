#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "protoseg/metrics.hpp"
#include "protoseg/rng.hpp"

using namespace protoseg;
using namespace protoseg::testing;

namespace {

using Mask = std::vector<std::uint8_t>;

double iou_ref(const Mask& a, const Mask& b) {
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    inter += a[i] && b[i];
    uni += a[i] || b[i];
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

Coverage coverage_ref(const std::vector<ClassMask>& pred, const std::vector<ClassMask>& gt) {
  Coverage c;
  if (gt.empty()) return c;
  std::size_t total = 0;
  for (const auto& g : gt)
    total += static_cast<std::size_t>(std::count(g.mask.begin(), g.mask.end(), 1));
  for (const auto& g : gt) {
    double best = 0.0;
    for (const auto& p : pred) best = std::max(best, iou_ref(g.mask, p.mask));
    const auto sz = static_cast<double>(std::count(g.mask.begin(), g.mask.end(), 1));
    c.mcov += best / static_cast<double>(gt.size());
    if (total > 0) c.mwcov += best * sz / static_cast<double>(total);
  }
  return c;
}

// Greedy per-class matching by descending IoU at the threshold, then
// precision/recall averaged over the classes that have predictions/GT.
PrecRec prec_rec_ref(const std::vector<ClassMask>& pred, const std::vector<ClassMask>& gt,
                     double iou_t) {
  std::set<std::int32_t> classes;
  for (const auto& p : pred) classes.insert(p.cls);
  for (const auto& g : gt) classes.insert(g.cls);
  double prec_sum = 0.0, rec_sum = 0.0;
  std::size_t prec_classes = 0, rec_classes = 0;
  for (std::int32_t cls : classes) {
    std::vector<const ClassMask*> ps, gs;
    for (const auto& p : pred)
      if (p.cls == cls) ps.push_back(&p);
    for (const auto& g : gt)
      if (g.cls == cls) gs.push_back(&g);
    struct Pair {
      double v;
      std::size_t pi, gi;
    };
    std::vector<Pair> pairs;
    for (std::size_t i = 0; i < ps.size(); ++i)
      for (std::size_t j = 0; j < gs.size(); ++j) {
        const double v = iou_ref(ps[i]->mask, gs[j]->mask);
        if (v >= iou_t) pairs.push_back({v, i, j});
      }
    std::stable_sort(pairs.begin(), pairs.end(),
                     [](const Pair& a, const Pair& b) { return a.v > b.v; });
    std::vector<bool> pu(ps.size()), gu(gs.size());
    std::size_t tp = 0;
    for (const auto& pr : pairs) {
      if (pu[pr.pi] || gu[pr.gi]) continue;
      pu[pr.pi] = gu[pr.gi] = true;
      ++tp;
    }
    if (!ps.empty()) {
      prec_sum += static_cast<double>(tp) / static_cast<double>(ps.size());
      ++prec_classes;
    }
    if (!gs.empty()) {
      rec_sum += static_cast<double>(tp) / static_cast<double>(gs.size());
      ++rec_classes;
    }
  }
  PrecRec out;
  if (prec_classes) out.mprec = prec_sum / static_cast<double>(prec_classes);
  if (rec_classes) out.mrec = rec_sum / static_cast<double>(rec_classes);
  return out;
}

Mask bits(std::size_t n, std::initializer_list<std::size_t> on) {
  Mask m(n, 0);
  for (std::size_t i : on) m[i] = 1;
  return m;
}

std::vector<ClassMask> random_masks(Rng& rng, std::size_t n, std::size_t count) {
  std::vector<ClassMask> out;
  for (std::size_t i = 0; i < count; ++i) {
    ClassMask cm;
    cm.cls = static_cast<std::int32_t>(rng.index(3));
    cm.mask.resize(n);
    for (auto& b : cm.mask) b = rng.uniform() < 0.4;
    out.push_back(std::move(cm));
  }
  return out;
}

}  // namespace

TEST_CASE("iou worked examples") {
  CHECK(iou(Mask{1, 1, 0, 0}, Mask{1, 0, 0, 0}) == doctest::Approx(0.5));
  CHECK(iou(Mask{1, 1}, Mask{1, 1}) == doctest::Approx(1.0));
  CHECK(iou(Mask{1, 0}, Mask{0, 1}) == doctest::Approx(0.0));
  CHECK(iou(Mask{0, 0}, Mask{0, 0}) == 0.0);
  CHECK_THROWS(iou(Mask{1}, Mask{1, 0}));
}

TEST_CASE("coverage worked example") {
  // GT A covers points 0-2, B covers point 3; both predictions equal A.
  std::vector<ClassMask> gt{{bits(4, {0, 1, 2}), 0}, {bits(4, {3}), 0}};
  std::vector<ClassMask> pred{{bits(4, {0, 1, 2}), 0}, {bits(4, {0, 1, 2}), 0}};
  Coverage c = coverage_metrics(pred, gt);
  CHECK(c.mcov == doctest::Approx(0.5));    // (1 + 0) / 2
  CHECK(c.mwcov == doctest::Approx(0.75));  // 1 * 3/4 + 0 * 1/4
}

TEST_CASE("duplicate perfect predictions halve precision but not recall") {
  std::vector<ClassMask> gt{{bits(4, {0, 1, 2}), 0}};
  std::vector<ClassMask> pred{{bits(4, {0, 1, 2}), 0}, {bits(4, {0, 1, 2}), 0}};
  PrecRec pr = prec_rec(pred, gt, 0.5);
  CHECK(pr.mprec == doctest::Approx(0.5));
  CHECK(pr.mrec == doctest::Approx(1.0));
}

TEST_CASE("precision and recall average per class") {
  // class 0: perfect; class 1: prediction misses the GT entirely
  std::vector<ClassMask> gt{{bits(4, {0, 1}), 0}, {bits(4, {2, 3}), 1}};
  std::vector<ClassMask> pred{{bits(4, {0, 1}), 0}, {bits(4, {0, 1}), 1}};
  PrecRec pr = prec_rec(pred, gt, 0.5);
  CHECK(pr.mprec == doctest::Approx(0.5));
  CHECK(pr.mrec == doctest::Approx(0.5));
}

TEST_CASE("coverage and matching agree with reference implementations") {
  Rng rng(400);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 4 + rng.index(12);
    const auto pred = random_masks(rng, n, rng.index(7));
    const auto gt = random_masks(rng, n, 1 + rng.index(6));
    Coverage c = coverage_metrics(pred, gt);
    Coverage cr = coverage_ref(pred, gt);
    CHECK(c.mcov == doctest::Approx(cr.mcov).epsilon(1e-12));
    CHECK(c.mwcov == doctest::Approx(cr.mwcov).epsilon(1e-12));
    PrecRec pr = prec_rec(pred, gt, 0.5);
    PrecRec prr = prec_rec_ref(pred, gt, 0.5);
    CHECK(pr.mprec == doctest::Approx(prr.mprec).epsilon(1e-12));
    CHECK(pr.mrec == doctest::Approx(prr.mrec).epsilon(1e-12));
  }
}

TEST_CASE("identical prediction and ground truth score perfectly") {
  Rng rng(401);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 6 + rng.index(10);
    std::vector<ClassMask> gt;
    // disjoint GT masks so the partition is valid
    std::size_t at = 0;
    while (at < n) {
      const std::size_t len = std::min(n - at, 1 + rng.index(4));
      ClassMask cm;
      cm.cls = static_cast<std::int32_t>(rng.index(3));
      cm.mask.assign(n, 0);
      for (std::size_t i = 0; i < len; ++i) cm.mask[at + i] = 1;
      gt.push_back(std::move(cm));
      at += len;
    }
    const std::vector<ClassMask> pred = gt;
    Coverage c = coverage_metrics(pred, gt);
    PrecRec pr = prec_rec(pred, gt, 0.5);
    CHECK(c.mcov == doctest::Approx(1.0));
    CHECK(c.mwcov == doctest::Approx(1.0));
    CHECK(pr.mprec == doctest::Approx(1.0));
    CHECK(pr.mrec == doctest::Approx(1.0));

    std::vector<Detection> dets;
    std::vector<GtInstance> gis;
    for (const auto& g : gt) {
      dets.push_back({g.mask, 0.9, g.cls, 0});
      gis.push_back({g.mask, g.cls, 0});
    }
    CHECK(map50(dets, gis, 0.5) == doctest::Approx(1.0));
  }
}

TEST_CASE("average precision worked example") {
  // one category, one scene, 10 points; GT: A={0,1}, B={2,3}, C={4,5}
  std::vector<GtInstance> gt{{bits(10, {0, 1}), 0, 0}, {bits(10, {2, 3}), 0, 0},
                             {bits(10, {4, 5}), 0, 0}};
  std::vector<Detection> dets{{bits(10, {0, 1}), 0.9, 0, 0},
                              {bits(10, {6, 7}), 0.8, 0, 0},
                              {bits(10, {2, 3}), 0.7, 0, 0},
                              {bits(10, {8, 9}), 0.6, 0, 0},
                              {bits(10, {4, 5}), 0.5, 0, 0}};
  // hits at ranks 1, 3, 5 -> interpolated precision (1 + 2/3 + 3/5) / 3
  CHECK(map50(dets, gt, 0.5) == doctest::Approx((1.0 + 2.0 / 3.0 + 3.0 / 5.0) / 3.0));
}

TEST_CASE("average precision ignores categories without ground truth") {
  std::vector<GtInstance> gt{{bits(4, {0, 1}), 0, 0}};
  std::vector<Detection> dets{{bits(4, {0, 1}), 0.9, 0, 0}, {bits(4, {2, 3}), 0.8, 5, 0}};
  CHECK(map50(dets, gt, 0.5) == doctest::Approx(1.0));
}

TEST_CASE("average precision matches detections only within their scene") {
  std::vector<GtInstance> gt{{bits(4, {0, 1}), 0, 0}};
  // same mask but declared in scene 1: cannot match the scene-0 GT
  std::vector<Detection> dets{{bits(4, {0, 1}), 0.9, 0, 1}};
  CHECK(map50(dets, gt, 0.5) == doctest::Approx(0.0));
}

TEST_CASE("duplicate detections of one instance count once") {
  std::vector<GtInstance> gt{{bits(4, {0, 1}), 0, 0}};
  std::vector<Detection> dets{{bits(4, {0, 1}), 0.9, 0, 0}, {bits(4, {0, 1}), 0.8, 0, 0}};
  // second detection is a false positive after the first claims the GT
  CHECK(map50(dets, gt, 0.5) == doctest::Approx(1.0));  // AP unaffected: hit already at rank 1
  std::vector<Detection> reversed{{bits(4, {0, 1}), 0.8, 0, 0}, {bits(4, {2, 3}), 0.9, 0, 0}};
  CHECK(map50(reversed, gt, 0.5) == doctest::Approx(0.5));  // miss first, hit at rank 2
}

TEST_CASE("masks_from_labels groups points and majority-votes the class") {
  const std::vector<std::int32_t> instance{4, 4, 4, 1, 1, -1};
  const std::vector<std::int32_t> semantic{2, 2, 0, 5, 5, 9};
  const std::vector<ClassMask> got = masks_from_labels(instance, semantic);
  REQUIRE(got.size() == 2);  // ids 1 then 4, ascending
  CHECK(got[0].mask == Mask{0, 0, 0, 1, 1, 0});
  CHECK(got[0].cls == 5);
  CHECK(got[1].mask == Mask{1, 1, 1, 0, 0, 0});
  CHECK(got[1].cls == 2);  // majority of {2,2,0}
}

TEST_CASE("empty inputs behave") {
  const std::vector<ClassMask> none;
  std::vector<ClassMask> gt{{bits(2, {0}), 0}};
  Coverage c = coverage_metrics(none, gt);
  CHECK(c.mcov == 0.0);
  CHECK(c.mwcov == 0.0);
  PrecRec pr = prec_rec(none, gt, 0.5);
  CHECK(pr.mprec == 0.0);
  CHECK(pr.mrec == 0.0);
  CHECK(map50(std::vector<Detection>{}, std::vector<GtInstance>{}, 0.5) == 0.0);
}
