#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "protoseg/rng.hpp"
#include "protoseg/tensor.hpp"

namespace protoseg::testing {

inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6});
}

inline Tensor rand_tensor(Rng& rng, std::vector<std::size_t> shape, bool grad = true,
                          double lo = -2.0, double hi = 2.0) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(lo, hi);
  return Tensor::from(std::move(v), std::move(shape), grad);
}

/// Values kept away from 0 so relu stays locally linear under FD probing.
inline Tensor rand_tensor_kink_free(Rng& rng, std::vector<std::size_t> shape,
                                    bool grad = true) {
  Tensor t = rand_tensor(rng, std::move(shape), grad);
  for (double& x : t.mutable_values())
    if (std::abs(x) < 0.05) x += x >= 0.0 ? 0.1 : -0.1;
  return t;
}

/// Entries along `axis` spread at least 0.1 apart within every slice, so
/// max reductions keep a stable argmax under FD probing.
inline Tensor rand_tensor_distinct(Rng& rng, const std::vector<std::size_t>& shape,
                                   std::size_t axis, bool grad = true) {
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];
  const std::size_t na = shape[axis];
  std::vector<double> v(outer * na * inner);
  std::vector<double> slot(na);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const double base = rng.uniform(-2.0, 0.0);
      for (std::size_t j = 0; j < na; ++j) slot[j] = base + 0.1 * static_cast<double>(j);
      for (std::size_t j = na; j > 1; --j) std::swap(slot[j - 1], slot[rng.index(j)]);
      for (std::size_t j = 0; j < na; ++j) v[o * na * inner + j * inner + in] = slot[j];
    }
  }
  return Tensor::from(std::move(v), shape, grad);
}

inline Tensor sum_all(Tensor t) {
  while (t.size() > 1 || t.rank() > 1) t = reduce_sum(t, 0);
  return t;
}

/// Random fixed weights turn a tensor into a scalar with informative
/// per-element gradients (a plain sum would hide sign errors). Takes the
/// generator by value: a closure re-invoking this draws the same weights
/// every time, which finite-difference probing depends on.
inline Tensor weighted_sum(const Tensor& t, Rng rng) {
  std::vector<double> w(t.size());
  for (double& x : w) x = rng.uniform(-1.0, 1.0);
  Tensor weights = Tensor::from(std::move(w), t.shape(), false);
  return sum_all(mul(t, weights));
}

/// Central finite differences on every element of every leaf against the
/// analytic gradients from one backward pass. `build` must reconstruct the
/// graph from the leaves' current values on each call.
///
/// Networks with relu and max-pooling are only piecewise smooth: a probe
/// step can straddle a kink, making the FD estimate itself meaningless at
/// that coordinate. When the primary comparison fails, the estimate is
/// recomputed at half the step; if the two estimates disagree with each
/// other the coordinate sits on a kink and is skipped. Only a handful of
/// such coordinates are tolerated, so the check cannot pass vacuously.
template <typename Build>
void check_gradients(std::vector<Tensor> leaves, Build build, double tol = 1e-4,
                     double h = 1e-5) {
  for (Tensor& l : leaves) l.zero_grad();
  Tensor loss = build();
  REQUIRE(loss.size() == 1);
  backward(loss);
  std::vector<std::vector<double>> analytic;
  for (Tensor& l : leaves) {
    REQUIRE(l.has_grad());
    analytic.emplace_back(l.grad().begin(), l.grad().end());
  }
  std::size_t total = 0, skipped = 0;
  for (std::size_t li = 0; li < leaves.size(); ++li) {
    auto vals = leaves[li].mutable_values();
    total += vals.size();
    for (std::size_t i = 0; i < vals.size(); ++i) {
      const double keep = vals[i];
      const auto probe = [&](double step) {
        vals[i] = keep + step;
        const double up = build().item();
        vals[i] = keep - step;
        const double dn = build().item();
        vals[i] = keep;
        return (up - dn) / (2.0 * step);
      };
      const double fd = probe(h);
      double err = rel_err(analytic[li][i], fd);
      if (err > tol) {
        const double fd_half = probe(h / 2.0);
        if (rel_err(fd, fd_half) > tol) {  // kink: FD disagrees with itself
          ++skipped;
          continue;
        }
        err = std::min(err, rel_err(analytic[li][i], fd_half));
      }
      CAPTURE(li);
      CAPTURE(i);
      CAPTURE(analytic[li][i]);
      CAPTURE(fd);
      CHECK(err <= tol);
    }
  }
  CHECK(skipped <= std::max<std::size_t>(3, total / 100));
}

}  // namespace protoseg::testing
