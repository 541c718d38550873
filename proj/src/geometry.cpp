#include "protoseg/geometry.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>
#include <string>

#include "protoseg/tensor.hpp"

namespace protoseg {

namespace {

double sqdist(const double* a, const double* b, std::size_t dim) {
  double acc = 0.0;
  for (std::size_t i = 0; i < dim; ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

std::size_t row_count(std::span<const double> data, std::size_t dim, const char* what) {
  if (dim == 0) throw std::invalid_argument(std::string(what) + ": dimension must be positive");
  if (data.size() % dim != 0)
    throw std::invalid_argument(std::string(what) + ": " + std::to_string(data.size()) +
                                " values do not form rows of width " + std::to_string(dim));
  return data.size() / dim;
}

}  // namespace

SampleSet fps(std::span<const double> vectors, std::size_t dim, std::size_t k, std::size_t start,
              SampleSpace space) {
  const std::size_t n = row_count(vectors, dim, "fps");
  if (k == 0) throw std::invalid_argument("fps: K must be positive");
  if (k > n)
    throw std::invalid_argument("fps: K=" + std::to_string(k) + " exceeds N=" + std::to_string(n));
  if (start >= n)
    throw std::invalid_argument("fps: start index " + std::to_string(start) + " out of range for " +
                                std::to_string(n) + " points");

  SampleSet out;
  out.space = space;
  out.indices.reserve(k);
  std::vector<double> min_d(n, std::numeric_limits<double>::infinity());
  std::vector<char> taken(n, 0);

  std::size_t current = start;
  out.indices.push_back(current);
  taken[current] = 1;
  for (std::size_t step = 1; step < k; ++step) {
    const double* c = vectors.data() + current * dim;
    op_stats().dist_evals += n;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = sqdist(vectors.data() + i * dim, c, dim);
      if (d < min_d[i]) min_d[i] = d;
    }
    std::size_t best = n;
    double best_d = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (taken[i]) continue;
      if (min_d[i] > best_d) {  // strict: ties keep the lowest index
        best_d = min_d[i];
        best = i;
      }
    }
    out.indices.push_back(best);
    taken[best] = 1;
    current = best;
  }
  return out;
}

NeighborIndex knn(std::span<const double> queries, std::size_t n_queries,
                  std::span<const double> base, std::size_t n_base, std::size_t dim,
                  std::size_t k) {
  if (row_count(queries, dim, "knn") != n_queries)
    throw std::invalid_argument("knn: query buffer does not hold " + std::to_string(n_queries) +
                                " rows");
  if (row_count(base, dim, "knn") != n_base)
    throw std::invalid_argument("knn: base buffer does not hold " + std::to_string(n_base) +
                                " rows");
  if (k == 0) throw std::invalid_argument("knn: k must be positive");
  if (k > n_base)
    throw std::invalid_argument("knn: k=" + std::to_string(k) + " exceeds base size " +
                                std::to_string(n_base));

  NeighborIndex out;
  out.k_base = k;
  out.lists.resize(n_queries);
  std::vector<double> dist(n_base);
  std::vector<std::size_t> order(n_base);
  for (std::size_t q = 0; q < n_queries; ++q) {
    const double* qp = queries.data() + q * dim;
    op_stats().dist_evals += n_base;
    for (std::size_t i = 0; i < n_base; ++i) dist[i] = sqdist(base.data() + i * dim, qp, dim);
    for (std::size_t i = 0; i < n_base; ++i) order[i] = i;
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                      [&](std::size_t a, std::size_t b) {
                        if (dist[a] != dist[b]) return dist[a] < dist[b];
                        return a < b;
                      });
    out.lists[q].assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
  }
  return out;
}

NeighborIndex dilated_select(const NeighborIndex& nbrs, std::size_t d, std::size_t k) {
  if (d == 0 || k == 0) throw std::invalid_argument("dilated_select: d and k must be positive");
  NeighborIndex out;
  out.k_base = k;
  out.lists.resize(nbrs.lists.size());
  for (std::size_t q = 0; q < nbrs.lists.size(); ++q) {
    const auto& list = nbrs.lists[q];
    if (list.size() < k * d)
      throw std::invalid_argument(
          "dilated_select: k*d=" + std::to_string(k * d) + " exceeds the stored " +
          std::to_string(list.size()) + " neighbors; recompute the neighbor index with k_base >= " +
          std::to_string(k * d));
    out.lists[q].resize(k);
    for (std::size_t j = 0; j < k; ++j) out.lists[q][j] = list[(j + 1) * d - 1];
  }
  return out;
}

}  // namespace protoseg
