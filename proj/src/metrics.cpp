#include "protoseg/metrics.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <stdexcept>
#include <string>

namespace protoseg {

double iou(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
  if (a.size() != b.size())
    throw std::invalid_argument("iou: mask lengths differ, " + std::to_string(a.size()) + " vs " +
                                std::to_string(b.size()));
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool x = a[i] != 0, y = b[i] != 0;
    inter += (x && y) ? 1 : 0;
    uni += (x || y) ? 1 : 0;
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

Coverage coverage_metrics(std::span<const ClassMask> pred, std::span<const ClassMask> gt) {
  Coverage out;
  if (gt.empty()) return out;
  double cov_sum = 0.0, wcov_sum = 0.0, size_sum = 0.0;
  for (const auto& g : gt) {
    double best = 0.0;
    for (const auto& p : pred) best = std::max(best, iou(g.mask, p.mask));
    const double size =
        static_cast<double>(std::count(g.mask.begin(), g.mask.end(), std::uint8_t(1)));
    cov_sum += best;
    wcov_sum += best * size;
    size_sum += size;
  }
  out.mcov = cov_sum / static_cast<double>(gt.size());
  out.mwcov = size_sum > 0.0 ? wcov_sum / size_sum : 0.0;
  return out;
}

namespace {

/// Greedy one-to-one matching by descending IoU; returns the number of
/// matched pairs at or above the threshold. Ties in IoU resolve by lower
/// (pred, gt) index pair.
std::size_t greedy_matches(std::span<const ClassMask* const> pred,
                           std::span<const ClassMask* const> gt, double iou_t) {
  struct Pair {
    double score;
    std::size_t p, g;
  };
  std::vector<Pair> pairs;
  for (std::size_t p = 0; p < pred.size(); ++p)
    for (std::size_t g = 0; g < gt.size(); ++g) {
      const double s = iou(pred[p]->mask, gt[g]->mask);
      if (s >= iou_t) pairs.push_back({s, p, g});
    }
  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.p != b.p) return a.p < b.p;
    return a.g < b.g;
  });
  std::vector<char> p_used(pred.size(), 0), g_used(gt.size(), 0);
  std::size_t tp = 0;
  for (const auto& pr : pairs) {
    if (p_used[pr.p] || g_used[pr.g]) continue;
    p_used[pr.p] = g_used[pr.g] = 1;
    ++tp;
  }
  return tp;
}

}  // namespace

PrecRec prec_rec(std::span<const ClassMask> pred, std::span<const ClassMask> gt, double iou_t) {
  std::set<std::int32_t> classes;
  for (const auto& p : pred) classes.insert(p.cls);
  for (const auto& g : gt) classes.insert(g.cls);

  double prec_sum = 0.0, rec_sum = 0.0;
  std::size_t prec_classes = 0, rec_classes = 0;
  for (std::int32_t c : classes) {
    std::vector<const ClassMask*> pc, gc;
    for (const auto& p : pred)
      if (p.cls == c) pc.push_back(&p);
    for (const auto& g : gt)
      if (g.cls == c) gc.push_back(&g);
    const std::size_t tp = greedy_matches(pc, gc, iou_t);
    if (!pc.empty()) {
      prec_sum += static_cast<double>(tp) / static_cast<double>(pc.size());
      ++prec_classes;
    }
    if (!gc.empty()) {
      rec_sum += static_cast<double>(tp) / static_cast<double>(gc.size());
      ++rec_classes;
    }
  }
  PrecRec out;
  out.mprec = prec_classes ? prec_sum / static_cast<double>(prec_classes) : 0.0;
  out.mrec = rec_classes ? rec_sum / static_cast<double>(rec_classes) : 0.0;
  return out;
}

double map50(std::span<const Detection> detections, std::span<const GtInstance> gt,
             double iou_t) {
  std::set<std::int32_t> categories;
  for (const auto& g : gt) categories.insert(g.category);
  if (categories.empty()) return 0.0;

  double ap_sum = 0.0;
  for (std::int32_t cat : categories) {
    std::vector<std::size_t> det_ids, gt_ids;
    for (std::size_t i = 0; i < detections.size(); ++i)
      if (detections[i].category == cat) det_ids.push_back(i);
    for (std::size_t i = 0; i < gt.size(); ++i)
      if (gt[i].category == cat) gt_ids.push_back(i);

    std::sort(det_ids.begin(), det_ids.end(), [&](std::size_t a, std::size_t b) {
      if (detections[a].confidence != detections[b].confidence)
        return detections[a].confidence > detections[b].confidence;
      return a < b;
    });

    std::vector<char> gt_used(gt_ids.size(), 0);
    std::vector<char> is_tp;
    is_tp.reserve(det_ids.size());
    for (std::size_t d : det_ids) {
      double best = 0.0;
      std::size_t best_g = gt_ids.size();
      for (std::size_t gi = 0; gi < gt_ids.size(); ++gi) {
        const auto& g = gt[gt_ids[gi]];
        if (gt_used[gi] || g.scene != detections[d].scene) continue;
        const double s = iou(detections[d].mask, g.mask);
        if (s > best) {
          best = s;
          best_g = gi;
        }
      }
      if (best >= iou_t && best_g < gt_ids.size()) {
        gt_used[best_g] = 1;
        is_tp.push_back(1);
      } else {
        is_tp.push_back(0);
      }
    }

    // All-point interpolated AP over the ranked list.
    const double n_gt = static_cast<double>(gt_ids.size());
    std::vector<double> prec(is_tp.size()), rec(is_tp.size());
    std::size_t tp = 0;
    for (std::size_t i = 0; i < is_tp.size(); ++i) {
      tp += is_tp[i];
      prec[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
      rec[i] = static_cast<double>(tp) / n_gt;
    }
    for (std::size_t i = prec.size(); i-- > 1;) prec[i - 1] = std::max(prec[i - 1], prec[i]);
    double ap = 0.0;
    double prev_rec = 0.0;
    for (std::size_t i = 0; i < prec.size(); ++i) {
      ap += (rec[i] - prev_rec) * prec[i];
      prev_rec = rec[i];
    }
    ap_sum += ap;
  }
  return ap_sum / static_cast<double>(categories.size());
}

std::vector<ClassMask> masks_from_labels(std::span<const std::int32_t> instance,
                                         std::span<const std::int32_t> semantic) {
  if (!semantic.empty() && semantic.size() != instance.size())
    throw std::invalid_argument("masks_from_labels: label lengths differ");
  std::map<std::int32_t, std::size_t> slot;  // ascending instance id -> mask index
  for (std::int32_t v : instance)
    if (v >= 0) slot.emplace(v, 0);
  std::size_t next = 0;
  for (auto& [id, idx] : slot) idx = next++;

  std::vector<ClassMask> out(slot.size());
  for (auto& cm : out) cm.mask.assign(instance.size(), 0);
  for (std::size_t i = 0; i < instance.size(); ++i)
    if (instance[i] >= 0) out[slot[instance[i]]].mask[i] = 1;

  for (const auto& [id, idx] : slot) {
    std::map<std::int32_t, std::size_t> votes;
    if (!semantic.empty())
      for (std::size_t i = 0; i < instance.size(); ++i)
        if (instance[i] == id) ++votes[semantic[i]];
    std::int32_t best_cls = 0;
    std::size_t best_count = 0;
    for (const auto& [cls, count] : votes) {  // ascending class: ties keep the lower
      if (count > best_count) {
        best_count = count;
        best_cls = cls;
      }
    }
    out[idx].cls = best_cls;
  }
  return out;
}

}  // namespace protoseg
