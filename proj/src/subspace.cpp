#include "rkmeans/subspace.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "rkmeans/error.hpp"

namespace rkmeans {

std::uint32_t ContinuousCentroids::nearest(double value) const {
  auto it = std::upper_bound(centroids.begin(), centroids.end(), value);
  if (it == centroids.begin()) return 0;
  if (it == centroids.end()) return static_cast<std::uint32_t>(centroids.size() - 1);
  std::size_t hi = static_cast<std::size_t>(it - centroids.begin());
  double below = value - centroids[hi - 1];
  double above = centroids[hi] - value;
  return static_cast<std::uint32_t>(below <= above ? hi - 1 : hi);
}

std::uint32_t CategoricalCentroids::centroid_of(Code category) const {
  auto it = heavy_index.find(category);
  return it == heavy_index.end() ? light_id() : it->second;
}

std::size_t centroid_count(const SubspaceCentroids& dim) {
  return std::visit([](const auto& d) { return d.size(); }, dim);
}

double subspace_cost(const SubspaceCentroids& dim) {
  return std::visit([](const auto& d) { return d.cost; }, dim);
}

const std::string& subspace_feature(const SubspaceCentroids& dim) {
  return std::visit([](const auto& d) -> const std::string& { return d.feature; }, dim);
}

ContinuousCentroids solve_continuous_1d(const MarginalTable& marginal, std::size_t kappa) {
  if (marginal.kind != Kind::Continuous) {
    throw ContractViolation("solve_continuous_1d: feature '" + marginal.feature +
                            "' is not continuous");
  }
  if (marginal.size() == 0) throw ContractViolation("solve_continuous_1d: empty marginal");
  if (kappa < 1) throw ContractViolation("solve_continuous_1d: kappa must be >= 1");

  const std::size_t n = marginal.size();
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = marginal.value(i);
  if (!std::is_sorted(x.begin(), x.end())) {
    throw ContractViolation("solve_continuous_1d: marginal values must be ascending");
  }

  ContinuousCentroids out;
  out.feature = marginal.feature;

  if (n <= kappa) {
    out.centroids = x;
  } else {
    // Prefix sums over values shifted by the median to limit cancellation.
    const long double shift = x[n / 2];
    std::vector<long double> pw(n + 1, 0), ps(n + 1, 0), pq(n + 1, 0);
    for (std::size_t i = 0; i < n; ++i) {
      long double w = static_cast<long double>(marginal.weights[i]);
      long double v = x[i] - shift;
      pw[i + 1] = pw[i] + w;
      ps[i + 1] = ps[i] + w * v;
      pq[i + 1] = pq[i] + w * v * v;
    }
    // Cost of one cluster holding values [i, j).
    auto cost = [&](std::size_t i, std::size_t j) {
      long double w = pw[j] - pw[i];
      long double s = ps[j] - ps[i];
      long double c = (pq[j] - pq[i]) - s * s / w;
      return c < 0 ? 0.0L : c;
    };

    const std::size_t k = kappa;
    constexpr long double inf = std::numeric_limits<long double>::infinity();
    // best[m][j]: optimal cost of the first j values in m+1 clusters.
    std::vector<std::vector<long double>> best(k, std::vector<long double>(n + 1, inf));
    std::vector<std::vector<std::size_t>> split(k, std::vector<std::size_t>(n + 1, 0));
    for (std::size_t j = 1; j <= n; ++j) best[0][j] = cost(0, j);
    for (std::size_t m = 1; m < k; ++m) {
      for (std::size_t j = m + 1; j <= n; ++j) {
        long double best_cost = inf;
        std::size_t best_split = m;
        for (std::size_t i = m; i < j; ++i) {
          long double c = best[m - 1][i] + cost(i, j);
          if (c < best_cost) {
            best_cost = c;
            best_split = i;
          }
        }
        best[m][j] = best_cost;
        split[m][j] = best_split;
      }
    }

    std::vector<std::size_t> bounds(k + 1);
    bounds[k] = n;
    for (std::size_t m = k - 1; m > 0; --m) bounds[m] = split[m][bounds[m + 1]];
    bounds[0] = 0;
    for (std::size_t m = 0; m < k; ++m) {
      long double w = 0, s = 0;
      for (std::size_t i = bounds[m]; i < bounds[m + 1]; ++i) {
        w += marginal.weights[i];
        s += marginal.weights[i] * static_cast<long double>(x[i]);
      }
      out.centroids.push_back(static_cast<double>(s / w));
    }
  }

  long double total_cost = 0;
  out.assignment.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.assignment[i] = out.nearest(x[i]);
    long double d = x[i] - static_cast<long double>(out.centroids[out.assignment[i]]);
    total_cost += marginal.weights[i] * d * d;
  }
  out.cost = static_cast<double>(total_cost);
  out.normalized_cost = static_cast<double>(total_cost / marginal.total());
  return out;
}

CategoricalCentroids solve_categorical(const MarginalTable& marginal, std::size_t kappa) {
  if (marginal.kind != Kind::Categorical) {
    throw ContractViolation("solve_categorical: feature '" + marginal.feature +
                            "' is not categorical");
  }
  if (marginal.size() == 0) throw ContractViolation("solve_categorical: empty marginal");
  if (kappa < 1) throw ContractViolation("solve_categorical: kappa must be >= 1");
  if (marginal.tokens.size() != marginal.size()) {
    throw ContractViolation("solve_categorical: marginal is missing category tokens");
  }

  const std::size_t n = marginal.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (marginal.weights[a] != marginal.weights[b]) return marginal.weights[a] > marginal.weights[b];
    return marginal.tokens[a] < marginal.tokens[b];
  });

  CategoricalCentroids out;
  out.feature = marginal.feature;
  const std::size_t heavy_count = n <= kappa ? n : kappa - 1;
  for (std::size_t i = 0; i < heavy_count; ++i) {
    out.heavy_index.emplace(marginal.values[order[i]], static_cast<std::uint32_t>(i));
    out.heavy.push_back(marginal.values[order[i]]);
    out.heavy_tokens.push_back(marginal.tokens[order[i]]);
  }

  if (heavy_count < n) {
    std::vector<std::size_t> light(order.begin() + heavy_count, order.end());
    std::sort(light.begin(), light.end(),
              [&](std::size_t a, std::size_t b) { return marginal.values[a] < marginal.values[b]; });
    std::uint64_t light_weight = 0;
    unsigned __int128 light_sq = 0;
    for (std::size_t i : light) {
      light_weight += marginal.weights[i];
      light_sq += static_cast<unsigned __int128>(marginal.weights[i]) * marginal.weights[i];
    }
    long double norm = 0;
    for (std::size_t i : light) {
      long double coord = static_cast<long double>(marginal.weights[i]) / light_weight;
      out.light.emplace_back(marginal.values[i], static_cast<double>(coord));
      out.light_tokens.push_back(marginal.tokens[i]);
      norm += coord * coord;
    }
    out.light_norm_sq = static_cast<double>(norm);
    long double cost = static_cast<long double>(light_weight) -
                       static_cast<long double>(light_sq) / static_cast<long double>(light_weight);
    out.cost = static_cast<double>(cost);
    out.normalized_cost = static_cast<double>(cost / marginal.total());
  }
  return out;
}

SubspaceCentroids solve_subspace(const MarginalTable& marginal, std::size_t kappa) {
  if (marginal.kind == Kind::Continuous) return solve_continuous_1d(marginal, kappa);
  return solve_categorical(marginal, kappa);
}

double categorical_objective(const std::unordered_map<std::string, double>& weights,
                             const std::vector<std::set<std::string>>& partition) {
  std::set<std::string> covered;
  long double total = 0;
  long double kept = 0;
  for (const auto& block : partition) {
    long double l1 = 0, l2 = 0;
    for (const auto& category : block) {
      auto it = weights.find(category);
      if (it == weights.end()) {
        throw ContractViolation("categorical_objective: unknown category '" + category + "'");
      }
      if (!covered.insert(category).second) {
        throw ContractViolation("categorical_objective: category '" + category +
                                "' appears in two blocks");
      }
      l1 += it->second;
      l2 += static_cast<long double>(it->second) * it->second;
    }
    if (l1 > 0) kept += l2 / l1;
  }
  if (covered.size() != weights.size()) {
    throw ContractViolation("categorical_objective: partition does not cover every category");
  }
  for (const auto& [category, w] : weights) total += w;
  return static_cast<double>(total - kept);
}

}  // namespace rkmeans
