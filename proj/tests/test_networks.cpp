#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "protoseg/backbone.hpp"
#include "protoseg/coeffnet.hpp"
#include "protoseg/geometry.hpp"
#include "protoseg/protoscore.hpp"
#include "protoseg/rng.hpp"

using namespace protoseg;
using namespace protoseg::testing;

namespace {

std::vector<double> random_coords(Rng& rng, std::size_t n) {
  std::vector<double> c(n * 3);
  for (double& v : c) v = rng.uniform(-1.0, 1.0);
  return c;
}

void zero_params(std::vector<NamedTensor>& params) {
  for (auto& [name, t] : params)
    std::fill(t.mutable_values().begin(), t.mutable_values().end(), 0.0);
}

}  // namespace

TEST_CASE("backbone maps N x in to N x F and rejects other widths") {
  Rng rng(1);
  Backbone net(5, 7, rng);
  Tensor x = rand_tensor(rng, {9, 5}, false);
  Tensor y = net(x);
  CHECK(y.shape() == std::vector<std::size_t>{9, 7});
  CHECK_THROWS(net(rand_tensor(rng, {9, 4}, false)));
}

TEST_CASE("backbone works on a single point") {
  Rng rng(2);
  Backbone net(4, 6, rng);
  Tensor y = net(rand_tensor(rng, {1, 4}, false));
  CHECK(y.shape() == std::vector<std::size_t>{1, 6});
}

TEST_CASE("backbone is permutation-equivariant") {
  Rng rng(3);
  const std::size_t n = 8, in = 5;
  Backbone net(in, 6, rng);
  Tensor x = rand_tensor(rng, {n, in}, false);
  Tensor y = net(x);

  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.index(i)]);

  std::vector<double> px(n * in);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < in; ++c) px[i * in + c] = x.values()[perm[i] * in + c];
  Tensor yp = net(Tensor::from(std::move(px), {n, in}));

  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < 6; ++c)
      CHECK(yp.values()[i * 6 + c] == y.values()[perm[i] * 6 + c]);  // bit-exact
}

TEST_CASE("protoscore head maps features to raw per-prototype scores") {
  Rng rng(4);
  ProtoScoreNet net(6, 10, rng);
  Tensor feats = rand_tensor(rng, {12, 6}, false);
  Tensor p = net(feats);
  CHECK(p.shape() == std::vector<std::size_t>{12, 10});
  bool outside_unit = false;
  for (double v : p.values()) outside_unit |= v < 0.0 || v > 1.0;
  CHECK(outside_unit);  // raw scores, not probabilities
}

TEST_CASE("coeffnet produces tanh-bounded K x M coefficients") {
  Rng rng(5);
  DpiConfig dpi;
  dpi.dilations = {1, 2};
  dpi.k = 3;
  dpi.branch_width = 8;
  dpi.fusion_width = 16;
  const std::size_t n = 20, f = 6, m = 9;
  CoeffNet net(dpi, f, m, rng);

  const std::vector<double> coords = random_coords(rng, n);
  const NeighborIndex nbrs = knn(coords, n, coords, n, 3, dpi.k_base());
  Tensor feats = rand_tensor(rng, {n, f}, false);
  const std::vector<std::size_t> samples{0, 4, 11, 19};

  Tensor c = net(samples, nbrs, feats, coords);
  CHECK(c.shape() == std::vector<std::size_t>{4, m});
  for (double v : c.values()) {
    CHECK(v > -1.0);
    CHECK(v < 1.0);
  }
}

TEST_CASE("coeffnet with zeroed weights emits exactly zero coefficients") {
  Rng rng(6);
  DpiConfig dpi;
  dpi.dilations = {1, 2};
  dpi.k = 2;
  dpi.branch_width = 4;
  dpi.fusion_width = 8;
  CoeffNet net(dpi, 5, 7, rng);
  std::vector<NamedTensor> params;
  net.collect(params);
  zero_params(params);

  const std::size_t n = 10;
  const std::vector<double> coords = random_coords(rng, n);
  const NeighborIndex nbrs = knn(coords, n, coords, n, 3, dpi.k_base());
  Tensor feats = rand_tensor(rng, {n, 5}, false);
  const std::vector<std::size_t> samples{1, 2};
  Tensor c = net(samples, nbrs, feats, coords);
  for (double v : c.values()) CHECK(v == 0.0);
}

TEST_CASE("coeffnet tolerates fully duplicated points") {
  Rng rng(7);
  DpiConfig dpi;
  dpi.dilations = {1, 2};
  dpi.k = 2;
  dpi.branch_width = 4;
  dpi.fusion_width = 8;
  CoeffNet net(dpi, 3, 4, rng);
  const std::size_t n = 6;
  const std::vector<double> coords(n * 3, 0.5);
  const NeighborIndex nbrs = knn(coords, n, coords, n, 3, dpi.k_base());
  Tensor feats = rand_tensor(rng, {n, 3}, false);
  const std::vector<std::size_t> samples{0, 5};
  Tensor c = net(samples, nbrs, feats, coords);
  CHECK(c.shape() == std::vector<std::size_t>{2, 4});
  for (double v : c.values()) CHECK(std::isfinite(v));
}

TEST_CASE("dpi config validation") {
  DpiConfig bad;
  bad.dilations = {2, 4};
  CHECK_THROWS(bad.validate());  // must start at 1
  bad.dilations = {1, 3, 2};
  CHECK_THROWS(bad.validate());  // strictly increasing
  bad.dilations = {1, 2};
  bad.k = 0;
  CHECK_THROWS(bad.validate());
}

TEST_CASE("gradient check through the backbone") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(seed + 40);
    Backbone net(3, 4, rng);
    std::vector<NamedTensor> named;
    net.collect(named);
    Tensor x = rand_tensor(rng, {5, 3});
    std::vector<Tensor> leaves{x};
    for (auto& [nm, t] : named) leaves.push_back(t);
    check_gradients(leaves, [&] { return weighted_sum(net(x), rng); }, 1e-3);
  }
}

TEST_CASE("gradient check through the prototype head") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(seed + 50);
    ProtoScoreNet net(4, 3, rng);
    std::vector<NamedTensor> named;
    net.collect(named);
    Tensor feats = rand_tensor(rng, {6, 4});
    std::vector<Tensor> leaves{feats};
    for (auto& [nm, t] : named) leaves.push_back(t);
    check_gradients(leaves, [&] { return weighted_sum(net(feats), rng); }, 1e-3);
  }
}

TEST_CASE("gradient check through the coefficient head") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(seed + 60);
    DpiConfig dpi;
    dpi.dilations = {1, 2};
    dpi.k = 2;
    dpi.branch_width = 3;
    dpi.fusion_width = 5;
    CoeffNet net(dpi, 3, 2, rng);
    std::vector<NamedTensor> named;
    net.collect(named);
    // Each sample's own row enters the kernel MLP with a zero offset, and
    // zero-initialized biases would park those pre-activations exactly on
    // the relu kink, where finite differences see the two-sided average.
    // Probe at a generic point instead.
    for (auto& [nm, t] : named)
      for (double& v : t.mutable_values())
        if (v == 0.0) v = rng.uniform(0.05, 0.15);

    const std::size_t n = 8;
    const std::vector<double> coords = random_coords(rng, n);
    const NeighborIndex nbrs = knn(coords, n, coords, n, 3, dpi.k_base());
    Tensor feats = rand_tensor(rng, {n, 3});
    const std::vector<std::size_t> samples{0, 3, 7};

    std::vector<Tensor> leaves{feats};
    for (auto& [nm, t] : named) leaves.push_back(t);
    check_gradients(leaves, [&] { return weighted_sum(net(samples, nbrs, feats, coords), rng); },
                    1e-3);
  }
}

TEST_CASE("parameter names are namespaced per module") {
  Rng rng(8);
  Backbone bb(3, 4, rng);
  ProtoScoreNet ps(4, 5, rng);
  DpiConfig dpi;
  dpi.dilations = {1, 2};
  dpi.k = 2;
  CoeffNet cn(dpi, 4, 5, rng);
  std::vector<NamedTensor> params;
  bb.collect(params);
  ps.collect(params);
  cn.collect(params);
  std::size_t backbone_n = 0, proto_n = 0, coeff_n = 0;
  for (const auto& [name, t] : params) {
    backbone_n += name.rfind("backbone.", 0) == 0;
    proto_n += name.rfind("protoscore.", 0) == 0;
    coeff_n += name.rfind("coeffnet.", 0) == 0;
  }
  CHECK(backbone_n == 6);             // three linears, w+b each
  CHECK(proto_n == 4);                // two linears
  CHECK(coeff_n == 2 * 6 + 4);        // two branches of three linears, plus fuse1/fuse2
  CHECK(params.size() == backbone_n + proto_n + coeff_n);
}
