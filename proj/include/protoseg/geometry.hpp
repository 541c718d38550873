#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace protoseg {

enum class SampleSpace { coordinates, features };

/// K point indices chosen by farthest point sampling, plus the space the
/// distances were measured in.
struct SampleSet {
  std::vector<std::size_t> indices;
  SampleSpace space = SampleSpace::coordinates;
};

/// Per-query neighbor lists, each sorted ascending by squared distance
/// (ties by lower index). One shared list of length k_base serves all
/// dilation factors.
struct NeighborIndex {
  std::size_t k_base = 0;
  std::vector<std::vector<std::size_t>> lists;
};

/// Greedy maximin subset selection over row vectors (row-major, `dim`
/// entries per row). After seeding with `start`, each step adds the index
/// whose minimum squared distance to the selected set is largest, ties
/// going to the lowest index.
SampleSet fps(std::span<const double> vectors, std::size_t dim, std::size_t k,
              std::size_t start = 0, SampleSpace space = SampleSpace::coordinates);

/// Exact brute-force k nearest neighbors of each query among `base` rows,
/// squared Euclidean, sorted ascending with ties by lower index.
NeighborIndex knn(std::span<const double> queries, std::size_t n_queries,
                  std::span<const double> base, std::size_t n_base, std::size_t dim,
                  std::size_t k);

/// Keep every d-th neighbor: sorted positions d-1, 2d-1, ..., k*d-1, so
/// d=1 returns the plain first-k prefix.
NeighborIndex dilated_select(const NeighborIndex& nbrs, std::size_t d, std::size_t k);

}  // namespace protoseg
