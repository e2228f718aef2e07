#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <sstream>

#include "coreset_oracles.hpp"
#include "rkmeans/error.hpp"
#include "subspace_oracles.hpp"

using namespace rkmeans;
using rkmeans::testing::close;

namespace {

testing::Instance single_relation(const std::string& csv, std::vector<AttributeSpec> spec,
                                  std::vector<std::string> features) {
  testing::Instance inst;
  inst.relations.push_back(parse_relation(csv, "R", spec, *inst.dict));
  inst.query = {{"R"}, features, {}};
  inst.features = resolve_features(inst.query, inst.relations);
  return inst;
}

double dense_distance(const CategoricalCentroids& dim, std::uint32_t id, const CategoricalComponent& mu) {
  std::map<Code, double> c, m;
  if (id < dim.heavy.size()) {
    c[dim.heavy[id]] = 1.0;
  } else {
    for (const auto& [code, v] : dim.light) c[code] = v;
  }
  for (const auto& [code, v] : mu.coords) m[code] = v;
  std::set<Code> keys;
  for (const auto& [k, v] : c) keys.insert(k);
  for (const auto& [k, v] : m) keys.insert(k);
  double d = 0;
  for (Code k : keys) {
    const double diff = (c.count(k) ? c[k] : 0.0) - (m.count(k) ? m[k] : 0.0);
    d += diff * diff;
  }
  return d;
}

std::size_t one_hot_dim(const GridCoreset& coreset) {
  std::size_t d = 0;
  for (const auto& dim : coreset.dims) {
    if (const auto* c = std::get_if<CategoricalCentroids>(&dim)) {
      d += c->domain_size();
    } else {
      d += 1;
    }
  }
  return d;
}

}  // namespace

TEST_CASE("sparse distance examples") {
  Dictionary dict;
  auto dim = solve_categorical(MarginalTable::categorical("c", {{"a", 5}, {"b", 3}, {"c", 2}}, dict), 2);
  const Code a = *dict.find("a"), b = *dict.find("b"), c = *dict.find("c");

  CategoricalComponent half;
  half.coords = {{a, 0.5}, {b, 0.5}};
  std::sort(half.coords.begin(), half.coords.end());
  half.refresh_norm();
  CHECK(sparse_distance(dim, 0, half) == doctest::Approx(0.5));

  CategoricalComponent same;
  same.coords = {{b, 0.6}, {c, 0.4}};
  std::sort(same.coords.begin(), same.coords.end());
  same.refresh_norm();
  CHECK(sparse_distance(dim, dim.light_id(), same) == doctest::Approx(0).epsilon(1e-12));
}

TEST_CASE("sparse distance equals dense distance on random pairs") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> unit(0, 1);
  int pairs = 0;
  for (int trial = 0; trial < 300; ++trial) {
    Dictionary dict;
    auto w = testing::random_category_weights(rng, 12);
    std::vector<std::pair<std::string, std::uint64_t>> entries;
    for (const auto& [k, v] : w) entries.emplace_back(k, static_cast<std::uint64_t>(v));
    auto dim = solve_categorical(MarginalTable::categorical("c", entries, dict),
                                 testing::pick(rng, 1, 5));
    dict.intern("outside");
    for (int rep = 0; rep < 5; ++rep) {
      CategoricalComponent mu;
      for (Code code = 0; code < dict.size(); ++code) {
        if (unit(rng) < 0.5) mu.coords.emplace_back(code, unit(rng));
      }
      mu.refresh_norm();
      for (std::uint32_t id = 0; id < dim.size(); ++id) {
        std::uint64_t terms = 0;
        CHECK(std::abs(sparse_distance(dim, id, mu, &terms) - dense_distance(dim, id, mu)) <= 1e-9);
        ++pairs;
      }
    }
  }
  CHECK(pairs >= 1000);
}

TEST_CASE("composite distance equals the dense one-hot distance") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 100; ++trial) {
    auto inst = testing::random_instance(rng);
    if (compute_join_count(build_join_tree(inst.query, inst.relations)) == 0) continue;
    auto run = testing::run_coreset(inst, testing::pick(rng, 2, 4));
    DataMatrix matrix = materialize_join(run.tree, inst.features);
    std::vector<double> fw;
    for (std::size_t j = 0; j < inst.features.size(); ++j) fw.push_back(0.5 + double(testing::pick(rng, 0, 4)));
    const std::size_t k = std::min<std::size_t>(3, run.coreset.size());
    auto centroids = seed_kmeans_pp(run.coreset, k, trial, fw);
    auto result = lloyd_iterate(run.coreset, centroids, {5, 0, fw, 1});
    for (std::size_t p = 0; p < run.coreset.size(); ++p) {
      Eigen::VectorXd x = matrix.embed(grid_point_centroid(run.coreset, p), fw);
      for (const auto& c : result.centroids) {
        CHECK(std::abs(composite_distance(run.coreset, p, c, fw) - (x - matrix.embed(c, fw)).squaredNorm()) <= 1e-9);
      }
    }
  }
}

TEST_CASE("k-means++ picks the first center proportionally to weight") {
  auto inst = single_relation("x\n0\n0\n0\n10\n", {{"x", Kind::Continuous, Role::Feature}}, {"x"});
  auto run = testing::run_coreset(inst, 2);
  REQUIRE(run.coreset.size() == 2);
  const int trials = 8000;
  int zero = 0;
  for (int s = 0; s < trials; ++s) {
    auto c = seed_kmeans_pp(run.coreset, 1, s);
    if (std::get<double>(c[0].components[0]) == 0.0) ++zero;
  }
  CHECK(double(zero) / trials == doctest::Approx(0.75).epsilon(0.03));
}

TEST_CASE("single point, k = 1") {
  auto inst = single_relation("x\n4\n", {{"x", Kind::Continuous, Role::Feature}}, {"x"});
  auto run = testing::run_coreset(inst, 2);
  auto c = seed_kmeans_pp(run.coreset, 1, 99);
  CHECK(std::get<double>(c[0].components[0]) == 4.0);
  CHECK_THROWS_AS(seed_kmeans_pp(run.coreset, 2, 1), ConfigError);
}

TEST_CASE("k equal to the coreset size gives objective zero in one iteration") {
  auto inst = single_relation("x,c\n0,a\n1,b\n10,a\n11,c\n",
                              {{"x", Kind::Continuous, Role::Feature}, {"c", Kind::Categorical, Role::Feature}},
                              {"x", "c"});
  auto run = testing::run_coreset(inst, 4);
  REQUIRE(run.coreset.size() == 4);
  auto result = weighted_kmeans(run.coreset, 4, 3, {});
  CHECK(result.objective == doctest::Approx(0).epsilon(1e-12));
  CHECK(result.iterations == 1);
}

TEST_CASE("tol 0 with max_iter 1 runs exactly one pass") {
  std::mt19937_64 rng(14);
  auto inst = testing::random_instance(rng, {3, 4, 8, 3, 6, 3});
  while (compute_join_count(build_join_tree(inst.query, inst.relations)) == 0) {
    inst = testing::random_instance(rng, {3, 4, 8, 3, 6, 3});
  }
  auto run = testing::run_coreset(inst, 3);
  LloydOptions options;
  options.max_iter = 1;
  options.tol = 0;
  auto result = weighted_kmeans(run.coreset, std::min<std::size_t>(2, run.coreset.size()), 1, options);
  CHECK(result.iterations == 1);
  CHECK(result.objective_history.size() == 2);
  CHECK(result.distance_terms.size() == 1);
}

TEST_CASE("well separated groups: Lloyd finds the within-group SSE") {
  auto inst = single_relation("x,y\n0,0\n1,0\n0,1\n100,100\n101,100\n100,102\n",
                              {{"x", Kind::Continuous, Role::Feature}, {"y", Kind::Continuous, Role::Feature}},
                              {"x", "y"});
  auto run = testing::run_coreset(inst, 6);
  DataMatrix matrix = materialize_join(run.tree, inst.features);
  const double opt = brute_force_kmeans(matrix, 2).objective;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto result = weighted_kmeans(run.coreset, 2, seed, {});
    CHECK(result.objective == doctest::Approx(opt));
  }
}

TEST_CASE("objective is non-increasing, deterministic and instrumented") {
  std::mt19937_64 rng(15);
  int runs = 0;
  for (int trial = 0; trial < 200; ++trial) {
    auto inst = testing::random_instance(rng, {2, 4, 10, 3, 8, 3});
    if (compute_join_count(build_join_tree(inst.query, inst.relations)) == 0) continue;
    auto run = testing::run_coreset(inst, testing::pick(rng, 2, 5));
    const std::size_t k = std::min<std::size_t>(testing::pick(rng, 1, 5), run.coreset.size());
    LloydOptions options;
    options.tol = 0;
    auto a = weighted_kmeans(run.coreset, k, trial, options);
    for (std::size_t i = 1; i < a.objective_history.size(); ++i) {
      CHECK(a.objective_history[i] <= a.objective_history[i - 1] + 1e-9);
    }
    options.threads = 4;
    auto b = weighted_kmeans(run.coreset, k, trial, options);
    CHECK(a.assignment == b.assignment);
    CHECK(a.objective == b.objective);

    const double bound = 4.0 * double(run.coreset.size() + one_hot_dim(run.coreset)) * double(k) *
                         double(run.coreset.features());
    for (auto terms : a.distance_terms) CHECK(double(terms) <= bound);
    ++runs;
  }
  CHECK(runs > 100);
}

TEST_CASE("centroids CSV format") {
  auto inst = single_relation("x,c\n1,a\n2,b\n",
                              {{"x", Kind::Continuous, Role::Feature}, {"c", Kind::Categorical, Role::Feature}},
                              {"x", "c"});
  CategoricalComponent comp;
  comp.coords = {{*inst.dict->find("b"), 0.25}, {*inst.dict->find("a"), 0.75}};
  std::sort(comp.coords.begin(), comp.coords.end());
  comp.refresh_norm();
  std::vector<Centroid> centroids{{{1.5, comp}}};
  std::ostringstream out;
  write_centroids_csv(out, centroids, inst.features, *inst.dict);
  CHECK(out.str() ==
        "centroid,feature,category,value\n"
        "0,x,*,1.5\n"
        "0,c,a,0.75\n"
        "0,c,b,0.25\n");
}
