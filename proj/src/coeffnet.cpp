#include "protoseg/coeffnet.hpp"

#include <stdexcept>
#include <string>

namespace protoseg {

namespace {
constexpr std::size_t kKernelHidden = 16;
}

void DpiConfig::validate() const {
  if (dilations.empty() || dilations.front() != 1)
    throw std::invalid_argument("dpi: dilations must start at 1");
  for (std::size_t i = 1; i < dilations.size(); ++i)
    if (dilations[i] <= dilations[i - 1])
      throw std::invalid_argument("dpi: dilations must be strictly increasing");
  if (k == 0 || branch_width == 0 || fusion_width == 0)
    throw std::invalid_argument("dpi: zero width");
}

PointConvBranch::PointConvBranch(std::size_t feat_dim, std::size_t branch_width, Rng& rng)
    : kmlp1(3, kKernelHidden, rng), kmlp2(kKernelHidden, feat_dim, rng),
      lift(feat_dim, branch_width, rng) {}

CoeffNet::CoeffNet(const DpiConfig& cfg_, std::size_t feat, std::size_t m_, Rng& rng)
    : cfg(cfg_), feat_dim(feat), m(m_) {
  cfg.validate();
  for (std::size_t i = 0; i < cfg.dilations.size(); ++i)
    branches.emplace_back(feat, cfg.branch_width, rng);
  fuse1 = Linear(cfg.dilations.size() * cfg.branch_width, cfg.fusion_width, rng);
  fuse2 = Linear(cfg.fusion_width, m, rng);
}

Tensor CoeffNet::operator()(std::span<const std::size_t> samples, const NeighborIndex& nbrs,
                            const Tensor& feats, std::span<const double> coords) const {
  if (samples.empty()) throw std::invalid_argument("coeffnet: no sampled points");
  if (feats.rank() != 2 || feats.cols() != feat_dim)
    throw std::invalid_argument("coeffnet: expected Nx" + std::to_string(feat_dim) +
                                " features, got " + shape_string(feats.shape()));
  const std::size_t n = feats.rows();
  if (coords.size() != n * 3)
    throw std::invalid_argument("coeffnet: coords buffer does not hold " + std::to_string(n) +
                                " xyz rows");
  const std::size_t k = cfg.k, n_samples = samples.size();

  std::vector<Tensor> branch_outs;
  branch_outs.reserve(cfg.dilations.size());
  for (std::size_t bi = 0; bi < cfg.dilations.size(); ++bi) {
    const NeighborIndex sel = dilated_select(nbrs, cfg.dilations[bi], k);

    // Flattened (K*k) neighbor rows and their relative coordinates.
    std::vector<std::size_t> flat;
    flat.reserve(n_samples * k);
    std::vector<double> delta;
    delta.reserve(n_samples * k * 3);
    for (std::size_t si = 0; si < n_samples; ++si) {
      const std::size_t s = samples[si];
      if (s >= n)
        throw std::invalid_argument("coeffnet: sample index " + std::to_string(s) +
                                    " out of range");
      const auto& list = sel.lists.at(s);
      for (std::size_t j : list) {
        flat.push_back(j);
        for (int c = 0; c < 3; ++c) delta.push_back(coords[j * 3 + c] - coords[s * 3 + c]);
      }
    }
    const auto& br = branches[bi];
    Tensor d = Tensor::from(std::move(delta), {n_samples * k, 3});
    Tensor kernel = br.kmlp2(relu(br.kmlp1(d)));
    Tensor gated = mul(kernel, gather_rows(feats, flat));
    branch_outs.push_back(br.lift(sum_groups(gated, k)));
  }
  Tensor fused = relu(fuse1(concat_cols(branch_outs)));
  return protoseg::tanh(fuse2(fused));
}

void CoeffNet::collect(std::vector<NamedTensor>& out) const {
  for (std::size_t i = 0; i < branches.size(); ++i) {
    const std::string p = "coeffnet.branch" + std::to_string(i);
    branches[i].kmlp1.collect(p + ".kmlp1", out);
    branches[i].kmlp2.collect(p + ".kmlp2", out);
    branches[i].lift.collect(p + ".lift", out);
  }
  fuse1.collect("coeffnet.fuse1", out);
  fuse2.collect("coeffnet.fuse2", out);
}

}  // namespace protoseg
