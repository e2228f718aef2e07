#pragma once

#include <cmath>
#include <map>
#include <vector>

#include "rkmeans/coreset.hpp"
#include "rkmeans/lloyd.hpp"
#include "rkmeans/oracle.hpp"
#include "test_support.hpp"

namespace rkmeans::testing {

struct CoresetRun {
  JoinTree tree;
  std::vector<MarginalTable> marginals;
  std::vector<SubspaceCentroids> dims;
  GridCoreset coreset;
};

inline CoresetRun run_coreset(const Instance& inst, std::size_t kappa) {
  JoinTree tree = build_join_tree(inst.query, inst.relations);
  auto marginals = compute_marginals(tree, inst.features, *inst.dict);
  std::vector<SubspaceCentroids> dims;
  for (const auto& m : marginals) dims.push_back(solve_subspace(m, kappa));
  auto quantized = quantize_relations(semijoin_reduce(tree), inst.features, dims);
  GridCoreset coreset = build_coreset(quantized);
  return {std::move(tree), std::move(marginals), std::move(dims), std::move(coreset)};
}

// Nearest centroid by scanning, lowest index on ties; heavy categories map to
// their position, everything else to the light id.
inline std::uint32_t oracle_quantize(const SubspaceCentroids& dim, Code code) {
  if (const auto* c = std::get_if<ContinuousCentroids>(&dim)) {
    const double x = decode_continuous(code);
    std::uint32_t best = 0;
    for (std::uint32_t i = 1; i < c->centroids.size(); ++i) {
      if (std::abs(x - c->centroids[i]) < std::abs(x - c->centroids[best])) best = i;
    }
    return best;
  }
  const auto& cat = std::get<CategoricalCentroids>(dim);
  for (std::uint32_t i = 0; i < cat.heavy.size(); ++i) {
    if (cat.heavy[i] == code) return i;
  }
  return cat.light_id();
}

inline std::map<std::vector<std::uint32_t>, std::uint64_t> oracle_coreset(
    const std::vector<JoinTuple>& tuples, const std::vector<FeatureRef>& features,
    const std::vector<SubspaceCentroids>& dims) {
  std::map<std::vector<std::uint32_t>, std::uint64_t> out;
  for (const auto& t : tuples) {
    std::vector<std::uint32_t> coords;
    for (std::size_t j = 0; j < features.size(); ++j) {
      coords.push_back(oracle_quantize(dims[j], t.values.at(features[j].attribute)));
    }
    out[coords] += t.weight;
  }
  return out;
}

inline std::map<std::vector<std::uint32_t>, std::uint64_t> as_map(const GridCoreset& coreset) {
  std::map<std::vector<std::uint32_t>, std::uint64_t> out;
  for (const auto& p : coreset.points) out[p.coords] += p.weight;
  return out;
}

// Sum over the materialized matrix of w(x) ||x - g(x)||^2 in dense one-hot
// space, where g(x) is the grid point of x.
inline double dense_quantization_cost(const DataMatrix& matrix, const GridCoreset& coreset) {
  double total = 0;
  for (std::size_t r = 0; r < matrix.size(); ++r) {
    Centroid g;
    for (std::size_t j = 0; j < matrix.features(); ++j) {
      g.components.push_back(grid_component(coreset.dims[j], oracle_quantize(coreset.dims[j], matrix.cell(r, j))));
    }
    total += double(matrix.weights[r]) * (matrix.one_hot(r) - matrix.embed(g)).squaredNorm();
  }
  return total;
}

}  // namespace rkmeans::testing
