#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "rkmeans/marginals.hpp"

namespace rkmeans {

// Optimal weighted k-means of one continuous feature.
struct ContinuousCentroids {
  std::string feature;
  std::vector<double> centroids;         // strictly increasing
  std::vector<std::uint32_t> assignment;  // parallel to the marginal's values
  double cost = 0;                        // sum_z w(z) (z - centroid(z))^2, raw weights
  double normalized_cost = 0;             // cost / total weight

  std::size_t size() const { return centroids.size(); }
  // Nearest centroid; an exact midpoint goes to the lower index.
  std::uint32_t nearest(double value) const;
};

// Optimal weighted k-means of one categorical feature under one-hot
// encoding: the heaviest kappa-1 categories are singleton clusters, the rest
// share one light cluster whose centroid is their weight distribution.
struct CategoricalCentroids {
  std::string feature;
  std::vector<Code> heavy;                // descending weight, ties by token
  std::vector<std::string> heavy_tokens;
  // Light centroid coordinates, sorted by code. Empty when every category is
  // heavy.
  std::vector<std::pair<Code, double>> light;
  std::vector<std::string> light_tokens;  // parallel to light
  double light_norm_sq = 0;
  double cost = 0;
  double normalized_cost = 0;

  bool has_light() const { return !light.empty(); }
  std::size_t size() const { return heavy.size() + (has_light() ? 1 : 0); }
  std::uint32_t light_id() const { return static_cast<std::uint32_t>(heavy.size()); }
  // Own id for a heavy category, the light id otherwise.
  std::uint32_t centroid_of(Code category) const;
  // Number of categories with nonzero weight.
  std::size_t domain_size() const { return heavy.size() + light.size(); }

  std::unordered_map<Code, std::uint32_t> heavy_index;
};

using SubspaceCentroids = std::variant<ContinuousCentroids, CategoricalCentroids>;

std::size_t centroid_count(const SubspaceCentroids& dim);
double subspace_cost(const SubspaceCentroids& dim);
const std::string& subspace_feature(const SubspaceCentroids& dim);

// Globally optimal weighted 1-D k-means by O(n^2 kappa) dynamic programming
// over the sorted distinct values. With n <= kappa every value is its own
// centroid.
ContinuousCentroids solve_continuous_1d(const MarginalTable& marginal, std::size_t kappa);

CategoricalCentroids solve_categorical(const MarginalTable& marginal, std::size_t kappa);

// Dispatches on the marginal's kind.
SubspaceCentroids solve_subspace(const MarginalTable& marginal, std::size_t kappa);

// ||v||_1 - sum_F ||v_F||_2^2 / ||v_F||_1 for a partition of the categories.
// Throws ContractViolation unless the partition covers every category of
// `weights` exactly once.
double categorical_objective(const std::unordered_map<std::string, double>& weights,
                             const std::vector<std::set<std::string>>& partition);

}  // namespace rkmeans
