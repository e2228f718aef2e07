#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "rkmeans/lloyd.hpp"

namespace rkmeans {

inline constexpr std::uint64_t kDefaultMaterializationCap = 10'000'000;

struct FeatureLayout {
  std::string name;
  Kind kind = Kind::Continuous;
  std::size_t offset = 0;        // first one-hot column
  std::vector<Code> categories;  // categorical domain, sorted by code
  std::unordered_map<Code, std::size_t> index;

  std::size_t width() const { return kind == Kind::Continuous ? 1 : categories.size(); }
};

// The join result projected onto the features, deduplicated with weights.
// This is the only place one-hot vectors are built.
struct DataMatrix {
  std::vector<FeatureLayout> layout;
  std::vector<Code> rows;  // row-major, one code per feature
  std::vector<std::uint64_t> weights;
  std::size_t one_hot_dim = 0;

  std::size_t size() const { return weights.size(); }
  std::size_t features() const { return layout.size(); }
  Code cell(std::size_t row, std::size_t feature) const { return rows[row * features() + feature]; }
  std::uint64_t total_weight() const;

  // Feature weights w_j scale the feature's block by sqrt(w_j).
  Eigen::VectorXd one_hot(std::size_t row, std::span<const double> feature_weights = {}) const;
  Eigen::MatrixXd dense(std::span<const double> feature_weights = {}) const;
  Eigen::VectorXd dense_weights() const;
  // Throws ContractViolation when a centroid mentions a category outside the
  // matrix domain or has the wrong layout.
  Eigen::VectorXd embed(const Centroid& centroid, std::span<const double> feature_weights = {}) const;
  // Grid points expanded to one-hot rows (|G| x D).
  Eigen::MatrixXd embed(const GridCoreset& coreset, std::span<const double> feature_weights = {}) const;
};

// Enumerates the join. Refuses with ResourceCapError when the exact join
// cardinality exceeds `cap`.
DataMatrix materialize_join(const JoinTree& tree, std::span<const FeatureRef> features,
                            std::uint64_t cap = kDefaultMaterializationCap);

struct BruteForceResult {
  double objective = 0;
  Eigen::MatrixXd centroids;  // one row per nonempty cluster
  std::vector<std::uint32_t> assignment;
};

// Exact weighted k-means by enumerating every partition of at most 10 points
// into at most k <= 4 blocks. Throws ResourceCapError on larger instances.
BruteForceResult brute_force_kmeans(const Eigen::MatrixXd& points, const Eigen::VectorXd& weights,
                                    std::size_t k);
BruteForceResult brute_force_kmeans(const DataMatrix& matrix, std::size_t k);

// Weighted SSE of the full matrix against the centroids, raw weights.
double evaluate_objective(const DataMatrix& matrix, std::span<const Centroid> centroids,
                          std::span<const double> feature_weights = {});
// Same with dense centroid rows in the matrix's one-hot layout (already
// feature-weighted if weights are used).
double evaluate_objective(const DataMatrix& matrix, const Eigen::MatrixXd& centroids,
                          std::span<const double> feature_weights = {});

struct DenseKMeansResult {
  Eigen::MatrixXd centroids;
  double objective = 0;
  std::size_t iterations = 0;
};

// Textbook weighted Lloyd with k-means++ seeding on dense rows; the
// materialize-then-cluster baseline.
DenseKMeansResult dense_weighted_kmeans(const Eigen::MatrixXd& points,
                                        const Eigen::VectorXd& weights, std::size_t k,
                                        std::uint64_t seed, std::size_t max_iter = 100,
                                        double tol = 1e-4);

}  // namespace rkmeans
