#pragma once

#include <algorithm>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "rkmeans/marginals.hpp"
#include "test_support.hpp"

namespace rkmeans::testing {

// Up to `max_n` distinct values on a half-integer grid with weights 1..5.
inline MarginalTable random_continuous_marginal(std::mt19937_64& rng, std::size_t max_n) {
  const std::size_t n = pick(rng, 1, max_n);
  std::set<double> values;
  while (values.size() < n) values.insert(0.5 * double(pick(rng, 0, 200)) - 50.0);
  std::vector<std::pair<double, std::uint64_t>> entries;
  for (double v : values) entries.emplace_back(v, pick(rng, 1, 5));
  return MarginalTable::continuous("x", entries);
}

inline double weighted_sse(const std::vector<double>& v, const std::vector<double>& w) {
  double sw = 0, swx = 0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    sw += w[i];
    swx += w[i] * v[i];
  }
  const double mean = swx / sw;
  double cost = 0;
  for (std::size_t i = 0; i < v.size(); ++i) cost += w[i] * (v[i] - mean) * (v[i] - mean);
  return cost;
}

// Minimum weighted SSE over every split of the sorted values into at most
// kappa contiguous groups.
inline double brute_contiguous(const MarginalTable& m, std::size_t kappa) {
  const std::size_t n = m.size();
  double best = std::numeric_limits<double>::infinity();
  for (std::uint32_t cuts = 0; cuts < (1u << (n - 1)); ++cuts) {
    if (static_cast<std::size_t>(__builtin_popcount(cuts)) + 1 > kappa) continue;
    double cost = 0;
    std::vector<double> v, w;
    for (std::size_t i = 0; i < n; ++i) {
      v.push_back(m.value(i));
      w.push_back(double(m.weights[i]));
      if (i + 1 == n || (cuts >> i) & 1u) {
        cost += weighted_sse(v, w);
        v.clear();
        w.clear();
      }
    }
    best = std::min(best, cost);
  }
  return best;
}

inline double assignment_cost(const MarginalTable& m, const std::vector<double>& centroids) {
  double cost = 0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (double c : centroids) best = std::min(best, (m.value(i) - c) * (m.value(i) - c));
    cost += double(m.weights[i]) * best;
  }
  return cost;
}

// Up to `max_l` categories with integer weights 1..20.
inline std::unordered_map<std::string, double> random_category_weights(std::mt19937_64& rng,
                                                                       std::size_t max_l) {
  const std::size_t l = pick(rng, 1, max_l);
  std::unordered_map<std::string, double> w;
  for (std::size_t i = 0; i < l; ++i) w["cat" + std::to_string(i)] = double(pick(rng, 1, 20));
  return w;
}

// Weighted SSE of the one-hot points of each block around the block mean,
// computed coordinate by coordinate.
inline double dense_categorical_sse(const std::unordered_map<std::string, double>& w,
                                    const std::vector<std::set<std::string>>& partition) {
  std::vector<std::string> cats;
  for (const auto& [k, v] : w) cats.push_back(k);
  std::sort(cats.begin(), cats.end());
  double total = 0;
  for (const auto& block : partition) {
    if (block.empty()) continue;
    double mass = 0;
    for (const auto& e : block) mass += w.at(e);
    std::vector<double> mean(cats.size(), 0.0);
    for (std::size_t d = 0; d < cats.size(); ++d) {
      if (block.count(cats[d])) mean[d] = w.at(cats[d]) / mass;
    }
    for (const auto& e : block) {
      double dist = 0;
      for (std::size_t d = 0; d < cats.size(); ++d) {
        const double x = cats[d] == e ? 1.0 : 0.0;
        dist += (x - mean[d]) * (x - mean[d]);
      }
      total += w.at(e) * dist;
    }
  }
  return total;
}

// Calls `fn(labels, blocks)` for every set partition of n items into at most
// max_blocks blocks (restricted growth strings).
inline void for_each_partition(std::size_t n, std::size_t max_blocks,
                               const std::function<void(const std::vector<std::size_t>&, std::size_t)>& fn) {
  std::vector<std::size_t> labels(n, 0);
  auto rec = [&](auto&& self, std::size_t i, std::size_t blocks) -> void {
    if (i == n) {
      fn(labels, blocks);
      return;
    }
    for (std::size_t b = 0; b <= blocks && b < max_blocks; ++b) {
      labels[i] = b;
      self(self, i + 1, std::max(blocks, b + 1));
    }
  };
  rec(rec, 0, 0);
}

// Minimum of the categorical objective over every partition into at most
// kappa blocks.
inline double bell_minimum(const std::unordered_map<std::string, double>& w, std::size_t kappa) {
  std::vector<std::string> cats;
  for (const auto& [k, v] : w) cats.push_back(k);
  double best = std::numeric_limits<double>::infinity();
  for_each_partition(cats.size(), kappa, [&](const std::vector<std::size_t>& labels, std::size_t blocks) {
    std::vector<std::set<std::string>> partition(blocks);
    for (std::size_t i = 0; i < cats.size(); ++i) partition[labels[i]].insert(cats[i]);
    best = std::min(best, dense_categorical_sse(w, partition));
  });
  return best;
}

}  // namespace rkmeans::testing
