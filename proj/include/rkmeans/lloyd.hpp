#pragma once

#include <cstdint>
#include <ostream>
#include <span>
#include <variant>
#include <vector>

#include "rkmeans/coreset.hpp"

namespace rkmeans {

// Sparse one-hot block of a centroid: coordinates sorted by category code,
// with the squared norm cached.
struct CategoricalComponent {
  std::vector<std::pair<Code, double>> coords;
  double norm_sq = 0;

  double coordinate(Code category) const;
  void refresh_norm();
};

// Continuous features hold a real coordinate, categorical ones a sparse block.
using CentroidComponent = std::variant<double, CategoricalComponent>;

struct Centroid {
  std::vector<CentroidComponent> components;  // one per feature
};

struct LloydOptions {
  std::size_t max_iter = 100;
  double tol = 1e-4;                   // relative objective decrease
  std::vector<double> feature_weights;  // empty means unit weights
  std::size_t threads = 1;
};

struct ClusteringResult {
  std::vector<Centroid> centroids;
  std::vector<std::uint32_t> assignment;  // per coreset point
  double objective = 0;                   // weighted SSE on the coreset, raw weights
  std::size_t iterations = 0;
  std::uint64_t seed = 0;
  // Objective after the initial assignment and after every iteration.
  std::vector<double> objective_history;
  // Distance terms evaluated in each iteration's assignment step, including
  // the per-centroid precomputation.
  std::vector<std::uint64_t> distance_terms;
};

// Component j of a grid point: the breakpoint, the heavy indicator, or the
// light centroid.
CentroidComponent grid_component(const SubspaceCentroids& dim, std::uint32_t id);
Centroid grid_point_centroid(const GridCoreset& coreset, std::size_t point);

// ||c - mu||^2 where c is subspace centroid `id` of a categorical feature.
// Heavy ids cost O(log |mu|) via 1 - 2 t_e + ||mu||^2; the light id costs
// O(|light| + |mu|) via ||c||^2 + ||mu||^2 - 2 <c, mu>. `terms`, when
// given, is incremented by the number of coordinate terms touched.
double sparse_distance(const CategoricalCentroids& dim, std::uint32_t id,
                       const CategoricalComponent& mu, std::uint64_t* terms = nullptr);

// Feature-weighted squared distance between a grid point and a centroid.
double composite_distance(const GridCoreset& coreset, std::size_t point, const Centroid& centroid,
                          std::span<const double> feature_weights = {});

// k-means++ over the weighted coreset: first center drawn proportionally to
// weight, later ones proportionally to weight times squared distance to the
// nearest chosen center. Deterministic for a given seed. Throws ConfigError
// when k exceeds the number of coreset points.
std::vector<Centroid> seed_kmeans_pp(const GridCoreset& coreset, std::size_t k,
                                     std::uint64_t seed,
                                     std::span<const double> feature_weights = {});

// Weighted Lloyd iterations with precomputed per-centroid distance tables.
// Empty clusters are reseated at the point with the largest weighted
// distance contribution.
ClusteringResult lloyd_iterate(const GridCoreset& coreset, std::vector<Centroid> centroids,
                               const LloydOptions& options);

// seed_kmeans_pp followed by lloyd_iterate.
ClusteringResult weighted_kmeans(const GridCoreset& coreset, std::size_t k, std::uint64_t seed,
                                 const LloydOptions& options);

// Writes `centroid,feature,category,value` rows; continuous features use the
// category "*", categorical ones list only nonzero coordinates.
void write_centroids_csv(std::ostream& out, std::span<const Centroid> centroids,
                         std::span<const FeatureRef> features, const Dictionary& dict);

}  // namespace rkmeans
