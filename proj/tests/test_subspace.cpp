#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <limits>
#include <random>

#include "rkmeans/error.hpp"
#include "rkmeans/subspace.hpp"
#include "subspace_oracles.hpp"
#include "test_support.hpp"

using namespace rkmeans;
using rkmeans::testing::close;

TEST_CASE("1-D example: {1,2,10,11,12}, kappa 2") {
  auto m = MarginalTable::continuous("x", {{1, 1}, {2, 1}, {10, 1}, {11, 1}, {12, 1}});
  auto c = solve_continuous_1d(m, 2);
  REQUIRE(c.centroids.size() == 2);
  CHECK(c.centroids[0] == doctest::Approx(1.5));
  CHECK(c.centroids[1] == doctest::Approx(11));
  CHECK(c.cost == doctest::Approx(2.5));
  CHECK(c.normalized_cost == doctest::Approx(0.5));
  CHECK(c.assignment == std::vector<std::uint32_t>{0, 0, 1, 1, 1});
}

TEST_CASE("1-D example: {0,10} weights {3,1}, kappa 1") {
  auto m = MarginalTable::continuous("x", {{0, 3}, {10, 1}});
  auto c = solve_continuous_1d(m, 1);
  REQUIRE(c.centroids.size() == 1);
  CHECK(c.centroids[0] == doctest::Approx(2.5));
  CHECK(c.cost == doctest::Approx(75));
  CHECK(testing::brute_contiguous(m, 1) == doctest::Approx(75));
}

TEST_CASE("1-D: kappa at least the number of values") {
  auto m = MarginalTable::continuous("x", {{5, 1}, {7, 1}});
  auto c = solve_continuous_1d(m, 2);
  CHECK(c.centroids == std::vector<double>{5, 7});
  CHECK(c.cost == 0);
  CHECK(solve_continuous_1d(m, 4).centroids.size() == 2);
}

TEST_CASE("1-D nearest breaks midpoint ties to the lower id") {
  ContinuousCentroids c;
  c.centroids = {1.5, 11};
  CHECK(c.nearest(6.4) == 1);
  CHECK(c.nearest(6.25) == 0);
  CHECK(c.nearest(-100) == 0);
  CHECK(c.nearest(100) == 1);
}

TEST_CASE("1-D DP matches brute force over contiguous partitions") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 300; ++trial) {
    auto m = testing::random_continuous_marginal(rng, 12);
    const std::size_t kappa = testing::pick(rng, 1, 4);
    auto c = solve_continuous_1d(m, kappa);
    CHECK(close(c.cost, testing::brute_contiguous(m, kappa), 1e-9, 1e-12));
    CHECK(close(c.cost, testing::assignment_cost(m, c.centroids), 1e-9, 1e-12));
    CHECK(c.centroids.size() <= kappa);
  }
}

TEST_CASE("1-D DP handles large offsets") {
  auto m = MarginalTable::continuous("x", {{1e9, 1}, {1e9 + 1, 1}, {1e9 + 10, 2}});
  auto c = solve_continuous_1d(m, 2);
  CHECK(c.cost == doctest::Approx(0.5));
}

TEST_CASE("categorical example: (0.5, 0.3, 0.2), kappa 2") {
  Dictionary dict;
  auto m = MarginalTable::categorical("c", {{"e1", 5}, {"e2", 3}, {"e3", 2}}, dict);
  auto c = solve_categorical(m, 2);
  REQUIRE(c.heavy_tokens == std::vector<std::string>{"e1"});
  REQUIRE(c.light.size() == 2);
  std::map<std::string, double> mu;
  for (std::size_t i = 0; i < c.light.size(); ++i) mu[c.light_tokens[i]] = c.light[i].second;
  CHECK(mu["e2"] == doctest::Approx(0.6));
  CHECK(mu["e3"] == doctest::Approx(0.4));
  CHECK(c.normalized_cost == doctest::Approx(0.24));
  CHECK(c.cost == doctest::Approx(2.4));
  CHECK(c.light_norm_sq == doctest::Approx(0.52));
  CHECK(c.centroid_of(*dict.find("e1")) == 0);
  CHECK(c.centroid_of(*dict.find("e3")) == c.light_id());
}

TEST_CASE("categorical: kappa at least the domain gives singletons") {
  Dictionary dict;
  auto m = MarginalTable::categorical("c", {{"a", 1}, {"b", 2}, {"c", 3}, {"d", 4}}, dict);
  auto c = solve_categorical(m, 4);
  CHECK(c.heavy.size() == 4);
  CHECK_FALSE(c.has_light());
  CHECK(c.cost == 0);
}

TEST_CASE("categorical heavy ties break by token") {
  Dictionary dict;
  auto m = MarginalTable::categorical("c", {{"b", 2}, {"a", 2}, {"c", 1}}, dict);
  auto c = solve_categorical(m, 2);
  CHECK(c.heavy_tokens == std::vector<std::string>{"a"});
}

TEST_CASE("categorical objective examples") {
  std::unordered_map<std::string, double> w{{"e1", 0.5}, {"e2", 0.3}, {"e3", 0.2}};
  CHECK(categorical_objective(w, {{"e1"}, {"e2", "e3"}}) == doctest::Approx(0.24));
  CHECK(categorical_objective(w, {{"e1"}, {"e2"}, {"e3"}}) == doctest::Approx(0));
  CHECK(categorical_objective(w, {{"e1", "e2", "e3"}}) == doctest::Approx(1.0 - 0.38));
  CHECK_THROWS_AS(categorical_objective(w, {{"e1"}, {"e2"}}), ContractViolation);
  CHECK_THROWS_AS(categorical_objective(w, {{"e1", "e2"}, {"e2", "e3"}}), ContractViolation);
}

TEST_CASE("categorical objective equals the dense one-hot SSE") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    auto w = testing::random_category_weights(rng, 8);
    std::vector<std::string> cats;
    for (const auto& [k, v] : w) cats.push_back(k);
    std::vector<std::set<std::string>> partition(testing::pick(rng, 1, cats.size()));
    for (std::size_t i = 0; i < cats.size(); ++i) {
      partition[i < partition.size() ? i : testing::pick(rng, 0, partition.size() - 1)].insert(cats[i]);
    }
    CHECK(close(categorical_objective(w, partition), testing::dense_categorical_sse(w, partition),
                1e-12, 1e-14));
  }
}

TEST_CASE("categorical closed form matches Bell enumeration") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 300; ++trial) {
    Dictionary dict;
    auto w = testing::random_category_weights(rng, 8);
    std::vector<std::pair<std::string, std::uint64_t>> entries;
    for (const auto& [k, v] : w) entries.emplace_back(k, static_cast<std::uint64_t>(v));
    auto m = MarginalTable::categorical("c", entries, dict);
    const std::size_t kappa = testing::pick(rng, 1, 4);
    auto c = solve_categorical(m, kappa);
    CHECK(close(c.cost, testing::bell_minimum(w, kappa), 1e-12, 1e-12));
    CHECK(c.size() <= kappa);
  }
}

TEST_CASE("subspace cost does not increase with kappa") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    auto m = testing::random_continuous_marginal(rng, 20);
    double prev = std::numeric_limits<double>::infinity();
    for (std::size_t kappa = 1; kappa <= 6; ++kappa) {
      double cost = solve_continuous_1d(m, kappa).cost;
      CHECK(cost <= prev + 1e-9);
      prev = cost;
    }
  }
}
