#include "protoseg/protoscore.hpp"

#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace protoseg {

namespace {
constexpr std::size_t kHidden = 128;
}

ProtoScoreNet::ProtoScoreNet(std::size_t feat, std::size_t m_, Rng& rng)
    : feat_dim(feat), m(m_), l1(feat, kHidden, rng), l2(kHidden, m_, rng) {}

Tensor ProtoScoreNet::operator()(const Tensor& feats) const {
  if (feats.rank() != 2 || feats.cols() != feat_dim)
    throw std::invalid_argument("protoscore: expected Nx" + std::to_string(feat_dim) +
                                " features, got " + shape_string(feats.shape()));
  return l2(relu(l1(feats)));
}

void ProtoScoreNet::collect(std::vector<NamedTensor>& out) const {
  l1.collect("protoscore.l1", out);
  l2.collect("protoscore.l2", out);
}

std::string export_prototype_scores(const Tensor& prototypes, const PointCloud& cloud,
                                    std::span<const std::size_t> ids) {
  const std::size_t n = prototypes.rows(), m = prototypes.cols();
  if (n != cloud.size())
    throw std::invalid_argument("export_prototype_scores: " + std::to_string(n) +
                                " prototype rows for " + std::to_string(cloud.size()) + " points");
  const auto v = prototypes.values();
  std::ostringstream out;
  for (std::size_t id : ids) {
    if (id >= m)
      throw std::invalid_argument("export_prototype_scores: prototype id " + std::to_string(id) +
                                  " out of range (M=" + std::to_string(m) + ")");
    double lo = v[id], hi = v[id];
    for (std::size_t i = 1; i < n; ++i) {
      const double s = v[i * m + id];
      lo = std::min(lo, s);
      hi = std::max(hi, s);
    }
    const double range = hi - lo;
    for (std::size_t i = 0; i < n; ++i) {
      const double s = range > 0.0 ? (v[i * m + id] - lo) / range : 0.0;
      nlohmann::json rec{{"prototype", id},
                         {"x", cloud.x(i)},
                         {"y", cloud.y(i)},
                         {"z", cloud.z(i)},
                         {"score", s}};
      out << rec.dump() << '\n';
    }
  }
  return out.str();
}

}  // namespace protoseg
