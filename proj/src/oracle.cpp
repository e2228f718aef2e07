#include "rkmeans/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <random>

#include "propagate.hpp"
#include "rkmeans/error.hpp"
#include "rkmeans/marginals.hpp"

namespace rkmeans {

std::uint64_t DataMatrix::total_weight() const {
  std::uint64_t total = 0;
  for (auto w : weights) total = detail::checked_add(total, w);
  return total;
}

namespace {

double scale_of(std::span<const double> feature_weights, std::size_t j) {
  return feature_weights.empty() ? 1.0 : std::sqrt(feature_weights[j]);
}

struct TupleHash {
  std::size_t operator()(const std::vector<Code>& key) const noexcept {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (Code c : key) {
      h ^= c;
      h *= 0x100000001B3ull;
      h ^= h >> 29;
    }
    return static_cast<std::size_t>(h);
  }
};

}  // namespace

Eigen::VectorXd DataMatrix::one_hot(std::size_t row, std::span<const double> feature_weights) const {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(one_hot_dim));
  for (std::size_t j = 0; j < features(); ++j) {
    const auto& f = layout[j];
    const double s = scale_of(feature_weights, j);
    if (f.kind == Kind::Continuous) {
      x[static_cast<Eigen::Index>(f.offset)] = s * decode_continuous(cell(row, j));
    } else {
      x[static_cast<Eigen::Index>(f.offset + f.index.at(cell(row, j)))] = s;
    }
  }
  return x;
}

Eigen::MatrixXd DataMatrix::dense(std::span<const double> feature_weights) const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(size()), static_cast<Eigen::Index>(one_hot_dim));
  for (std::size_t r = 0; r < size(); ++r) {
    out.row(static_cast<Eigen::Index>(r)) = one_hot(r, feature_weights).transpose();
  }
  return out;
}

Eigen::VectorXd DataMatrix::dense_weights() const {
  Eigen::VectorXd w(static_cast<Eigen::Index>(size()));
  for (std::size_t r = 0; r < size(); ++r) w[static_cast<Eigen::Index>(r)] = static_cast<double>(weights[r]);
  return w;
}

Eigen::VectorXd DataMatrix::embed(const Centroid& centroid,
                                  std::span<const double> feature_weights) const {
  if (centroid.components.size() != features()) {
    throw ContractViolation("embed: centroid has " + std::to_string(centroid.components.size()) +
                            " components, matrix has " + std::to_string(features()) + " features");
  }
  Eigen::VectorXd x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(one_hot_dim));
  for (std::size_t j = 0; j < features(); ++j) {
    const auto& f = layout[j];
    const double s = scale_of(feature_weights, j);
    const auto& comp = centroid.components[j];
    if (f.kind == Kind::Continuous) {
      const auto* v = std::get_if<double>(&comp);
      if (!v) throw ContractViolation("embed: feature '" + f.name + "' expects a real coordinate");
      x[static_cast<Eigen::Index>(f.offset)] = s * *v;
      continue;
    }
    const auto* cat = std::get_if<CategoricalComponent>(&comp);
    if (!cat) throw ContractViolation("embed: feature '" + f.name + "' expects a categorical block");
    for (const auto& [code, value] : cat->coords) {
      auto it = f.index.find(code);
      if (it == f.index.end()) {
        if (value == 0) continue;
        throw ContractViolation("embed: category outside the domain of feature '" + f.name + "'");
      }
      x[static_cast<Eigen::Index>(f.offset + it->second)] = s * value;
    }
  }
  return x;
}

Eigen::MatrixXd DataMatrix::embed(const GridCoreset& coreset,
                                  std::span<const double> feature_weights) const {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(coreset.size()),
                      static_cast<Eigen::Index>(one_hot_dim));
  for (std::size_t p = 0; p < coreset.size(); ++p) {
    out.row(static_cast<Eigen::Index>(p)) =
        embed(grid_point_centroid(coreset, p), feature_weights).transpose();
  }
  return out;
}

DataMatrix materialize_join(const JoinTree& tree, std::span<const FeatureRef> features,
                            std::uint64_t cap) {
  const std::uint64_t cardinality = compute_join_count(tree);
  if (cardinality > cap) {
    throw ResourceCapError("join has " + std::to_string(cardinality) +
                           " rows, above the materialization cap of " + std::to_string(cap));
  }

  const JoinTree reduced = semijoin_reduce(tree);
  detail::TreeIndex index(reduced);
  const std::size_t n_nodes = reduced.size();

  // For every non-root node: child rows grouped by edge key id.
  std::vector<std::vector<std::vector<std::uint32_t>>> rows_by_key(n_nodes);
  for (std::size_t c = 0; c < n_nodes; ++c) {
    if (c == reduced.root()) continue;
    const auto& edge = index.edge(c);
    rows_by_key[c].resize(edge.key_count);
    for (std::size_t r = 0; r < edge.child_key.size(); ++r) {
      rows_by_key[c][edge.child_key[r]].push_back(static_cast<std::uint32_t>(r));
    }
  }

  const std::size_t d = features.size();
  std::vector<std::size_t> owner(d), column(d);
  for (std::size_t j = 0; j < d; ++j) {
    owner[j] = reduced.owner_of(features[j].attribute);
    column[j] = *reduced.relation(owner[j]).column_of(features[j].attribute);
  }

  const std::vector<std::size_t> order = reduced.pre_order();
  std::vector<std::size_t> chosen(n_nodes, 0);
  std::vector<Code> key(d);
  std::unordered_map<std::vector<Code>, std::uint64_t, TupleHash> groups;

  std::function<void(std::size_t, std::uint64_t)> extend = [&](std::size_t pos, std::uint64_t mult) {
    if (pos == order.size()) {
      for (std::size_t j = 0; j < d; ++j) key[j] = reduced.relation(owner[j]).cell(chosen[owner[j]], column[j]);
      auto it = groups.find(key);
      if (it == groups.end()) {
        groups.emplace(key, mult);
      } else {
        it->second = detail::checked_add(it->second, mult);
      }
      return;
    }
    const std::size_t node = order[pos];
    const Relation& rel = reduced.relation(node);
    if (node == reduced.root()) {
      for (std::size_t r = 0; r < rel.size(); ++r) {
        chosen[node] = r;
        extend(pos + 1, detail::checked_mul(mult, rel.multiplicity(r)));
      }
      return;
    }
    const std::size_t parent = reduced.node(node).parent;
    const std::uint32_t k = index.edge(node).parent_key[chosen[parent]];
    if (k == detail::kMissingKey) return;
    for (std::uint32_t r : rows_by_key[node][k]) {
      chosen[node] = r;
      extend(pos + 1, detail::checked_mul(mult, rel.multiplicity(r)));
    }
  };
  extend(0, 1);

  DataMatrix m;
  std::vector<std::pair<std::vector<Code>, std::uint64_t>> sorted(groups.begin(), groups.end());
  std::sort(sorted.begin(), sorted.end());
  for (auto& [tuple, weight] : sorted) {
    m.rows.insert(m.rows.end(), tuple.begin(), tuple.end());
    m.weights.push_back(weight);
  }

  std::size_t offset = 0;
  for (std::size_t j = 0; j < d; ++j) {
    FeatureLayout f;
    f.name = features[j].attribute;
    f.kind = features[j].kind;
    f.offset = offset;
    if (f.kind == Kind::Categorical) {
      for (std::size_t r = 0; r < m.size(); ++r) f.categories.push_back(m.rows[r * d + j]);
      std::sort(f.categories.begin(), f.categories.end());
      f.categories.erase(std::unique(f.categories.begin(), f.categories.end()), f.categories.end());
      for (std::size_t i = 0; i < f.categories.size(); ++i) f.index.emplace(f.categories[i], i);
    }
    offset += f.width();
    m.layout.push_back(std::move(f));
  }
  m.one_hot_dim = offset;
  return m;
}

BruteForceResult brute_force_kmeans(const Eigen::MatrixXd& points, const Eigen::VectorXd& weights,
                                    std::size_t k) {
  const std::size_t n = static_cast<std::size_t>(points.rows());
  if (n > 10 || k > 4) {
    throw ResourceCapError("brute-force k-means handles at most 10 points and k <= 4 (got " +
                           std::to_string(n) + " points, k = " + std::to_string(k) + ")");
  }
  if (k == 0) throw ContractViolation("brute_force_kmeans: k must be at least 1");
  if (n == 0) throw ContractViolation("brute_force_kmeans: no points");

  BruteForceResult best;
  best.objective = std::numeric_limits<double>::infinity();
  std::vector<std::uint32_t> label(n, 0);

  auto evaluate = [&](std::size_t blocks) {
    Eigen::MatrixXd centroids = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(blocks), points.cols());
    Eigen::VectorXd mass = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(blocks));
    for (std::size_t i = 0; i < n; ++i) {
      auto b = static_cast<Eigen::Index>(label[i]);
      centroids.row(b) += weights[static_cast<Eigen::Index>(i)] * points.row(static_cast<Eigen::Index>(i));
      mass[b] += weights[static_cast<Eigen::Index>(i)];
    }
    for (Eigen::Index b = 0; b < centroids.rows(); ++b) centroids.row(b) /= mass[b];
    double sse = 0;
    for (std::size_t i = 0; i < n; ++i) {
      sse += weights[static_cast<Eigen::Index>(i)] *
             (points.row(static_cast<Eigen::Index>(i)) - centroids.row(label[i])).squaredNorm();
    }
    if (sse < best.objective) {
      best.objective = sse;
      best.centroids = centroids;
      best.assignment = label;
    }
  };

  // Restricted growth strings enumerate each set partition once.
  std::function<void(std::size_t, std::size_t)> recurse = [&](std::size_t i, std::size_t blocks) {
    if (i == n) {
      evaluate(blocks);
      return;
    }
    for (std::size_t b = 0; b < blocks; ++b) {
      label[i] = static_cast<std::uint32_t>(b);
      recurse(i + 1, blocks);
    }
    if (blocks < k) {
      label[i] = static_cast<std::uint32_t>(blocks);
      recurse(i + 1, blocks + 1);
    }
  };
  recurse(0, 0);
  return best;
}

BruteForceResult brute_force_kmeans(const DataMatrix& matrix, std::size_t k) {
  return brute_force_kmeans(matrix.dense(), matrix.dense_weights(), k);
}

double evaluate_objective(const DataMatrix& matrix, const Eigen::MatrixXd& centroids,
                          std::span<const double> feature_weights) {
  if (static_cast<std::size_t>(centroids.cols()) != matrix.one_hot_dim || centroids.rows() == 0) {
    throw ContractViolation("evaluate_objective: centroid layout does not match the matrix");
  }
  double total = 0;
  for (std::size_t r = 0; r < matrix.size(); ++r) {
    Eigen::VectorXd x = matrix.one_hot(r, feature_weights);
    double best = (centroids.rowwise() - x.transpose()).rowwise().squaredNorm().minCoeff();
    total += static_cast<double>(matrix.weights[r]) * best;
  }
  return total;
}

double evaluate_objective(const DataMatrix& matrix, std::span<const Centroid> centroids,
                          std::span<const double> feature_weights) {
  if (!feature_weights.empty() && feature_weights.size() != matrix.features()) {
    throw ContractViolation("evaluate_objective: feature weight count mismatch");
  }
  Eigen::MatrixXd dense(static_cast<Eigen::Index>(centroids.size()),
                        static_cast<Eigen::Index>(matrix.one_hot_dim));
  for (std::size_t c = 0; c < centroids.size(); ++c) {
    dense.row(static_cast<Eigen::Index>(c)) = matrix.embed(centroids[c], feature_weights).transpose();
  }
  return evaluate_objective(matrix, dense, feature_weights);
}

DenseKMeansResult dense_weighted_kmeans(const Eigen::MatrixXd& points,
                                        const Eigen::VectorXd& weights, std::size_t k,
                                        std::uint64_t seed, std::size_t max_iter, double tol) {
  const Eigen::Index n = points.rows();
  if (k == 0 || static_cast<Eigen::Index>(k) > n) {
    throw ConfigError("dense_weighted_kmeans: k must be in [1, number of rows]");
  }
  std::mt19937_64 rng(seed);
  auto uniform = [&] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
  auto sample = [&](const Eigen::VectorXd& mass) {
    const double target = uniform() * mass.sum();
    double running = 0;
    Eigen::Index last = -1;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (mass[i] <= 0) continue;
      last = i;
      running += mass[i];
      if (running > target) return i;
    }
    return last;
  };

  Eigen::MatrixXd centers(static_cast<Eigen::Index>(k), points.cols());
  Eigen::Index first = sample(weights);
  centers.row(0) = points.row(first);
  Eigen::VectorXd nearest = (points.rowwise() - centers.row(0)).rowwise().squaredNorm();
  for (Eigen::Index c = 1; c < static_cast<Eigen::Index>(k); ++c) {
    Eigen::Index next = sample(weights.cwiseProduct(nearest));
    if (next < 0) next = c % n;
    centers.row(c) = points.row(next);
    nearest = nearest.cwiseMin((points.rowwise() - centers.row(c)).rowwise().squaredNorm());
  }

  std::vector<Eigen::Index> assign(static_cast<std::size_t>(n));
  Eigen::VectorXd contribution(n);
  auto assign_step = [&] {
    double obj = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      Eigen::Index best;
      double d = (centers.rowwise() - points.row(i)).rowwise().squaredNorm().minCoeff(&best);
      assign[static_cast<std::size_t>(i)] = best;
      contribution[i] = weights[i] * d;
      obj += contribution[i];
    }
    return obj;
  };

  DenseKMeansResult result;
  double objective = assign_step();
  for (std::size_t it = 1; it <= max_iter; ++it) {
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(centers.rows(), centers.cols());
    Eigen::VectorXd mass = Eigen::VectorXd::Zero(centers.rows());
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(assign[static_cast<std::size_t>(i)]) += weights[i] * points.row(i);
      mass[assign[static_cast<std::size_t>(i)]] += weights[i];
    }
    for (Eigen::Index c = 0; c < centers.rows(); ++c) {
      if (mass[c] > 0) {
        centers.row(c) = sums.row(c) / mass[c];
      } else {
        Eigen::Index worst;
        contribution.maxCoeff(&worst);
        contribution[worst] = -1;
        centers.row(c) = points.row(worst);
      }
    }
    const double previous = objective;
    objective = assign_step();
    result.iterations = it;
    const double decrease = previous > 0 ? (previous - objective) / previous : 0.0;
    if (decrease < tol) break;
  }
  result.centroids = centers;
  result.objective = objective;
  return result;
}

}  // namespace rkmeans
