#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "coreset_oracles.hpp"
#include "rkmeans/error.hpp"

using namespace rkmeans;
using rkmeans::testing::close;

TEST_CASE("continuous quantization picks the nearest breakpoint") {
  ContinuousCentroids c;
  c.centroids = {1.5, 11};
  SubspaceCentroids dim = c;
  CHECK(quantize_value(dim, encode_continuous(6.4)) == 1);
  CHECK(quantize_value(dim, encode_continuous(6.25)) == 0);
  CHECK(quantize_value(dim, encode_continuous(1.5)) == 0);
}

TEST_CASE("categorical quantization: heavy keeps its id, light maps to the light id") {
  Dictionary dict;
  auto m = MarginalTable::categorical("c", {{"a", 5}, {"b", 3}, {"c", 2}}, dict);
  SubspaceCentroids dim = solve_categorical(m, 2);
  CHECK(quantize_value(dim, *dict.find("a")) == 0);
  CHECK(quantize_value(dim, *dict.find("b")) == 1);
  CHECK(quantize_value(dim, *dict.find("c")) == 1);
}

TEST_CASE("grid packing round trips and refuses overflow") {
  GridPacking p({3, 5, 2});
  std::vector<std::uint32_t> coords{2, 4, 1};
  CHECK(p.unpack(p.pack(coords)) == coords);
  CHECK(p.pack(coords) == 2 + 4 * 3 + 1 * 15);
  CHECK_THROWS_AS(GridPacking(std::vector<std::size_t>(70, 2)), OverflowError);
}

TEST_CASE("two features with two centroids each, all combinations present") {
  testing::Instance inst;
  std::vector<AttributeSpec> spec{{"x", Kind::Continuous, Role::Feature},
                                  {"y", Kind::Continuous, Role::Feature}};
  inst.relations.push_back(parse_relation("x,y\n0,0\n0,10\n10,0\n10,10\n1,1\n", "R", spec, *inst.dict));
  inst.query = {{"R"}, {"x", "y"}, {}};
  inst.features = resolve_features(inst.query, inst.relations);
  auto run = testing::run_coreset(inst, 2);
  CHECK(run.coreset.size() == 4);
  CHECK(run.coreset.total_weight == 5);
}

TEST_CASE("single feature coreset is the centroids with marginal-sum weights") {
  testing::Instance inst;
  std::vector<AttributeSpec> spec{{"x", Kind::Continuous, Role::Feature}};
  inst.relations.push_back(parse_relation("x\n1\n2\n10\n11\n12\n12\n", "R", spec, *inst.dict));
  inst.query = {{"R"}, {"x"}, {}};
  inst.features = resolve_features(inst.query, inst.relations);
  auto run = testing::run_coreset(inst, 2);
  REQUIRE(run.coreset.size() == 2);
  CHECK(run.coreset.points[0].weight == 2);
  CHECK(run.coreset.points[1].weight == 4);
}

TEST_CASE("FD chain city -> state keeps at most d(kappa-1)+1 grid points") {
  testing::Instance inst;
  std::vector<AttributeSpec> spec{{"city", Kind::Categorical, Role::Feature},
                                  {"state", Kind::Categorical, Role::Feature}};
  inst.relations.push_back(
      parse_relation("city,state\nNYC,NY\nLA,CA\nSF,CA\nNYC,NY\n", "R", spec, *inst.dict));
  inst.query = {{"R"}, {"city", "state"}, {{{"city", "state"}}}};
  inst.features = resolve_features(inst.query, inst.relations);
  auto run = testing::run_coreset(inst, 2);
  CHECK(run.coreset.size() <= 3);
  auto report = check_fd_bound(run.coreset, inst.query.fd_chains, 2);
  CHECK(report.bound == 3);
  CHECK(report.holds);
}

TEST_CASE("FD bound formula") {
  GridCoreset coreset;
  Dictionary dict;
  for (int j = 0; j < 5; ++j) {
    coreset.dims.push_back(
        solve_categorical(MarginalTable::categorical("f" + std::to_string(j), {{"a", 1}}, dict), 2));
  }
  CHECK(check_fd_bound(coreset, {}, 3).bound == 243);
  std::vector<FdChainDecl> five{{{"f0", "f1", "f2", "f3", "f4"}}};
  CHECK(check_fd_bound(coreset, five, 4).bound == 1 + 5 * 3);
  std::vector<FdChainDecl> one{{{"f0"}}};
  CHECK(check_fd_bound(coreset, one, 4).bound == 4 * 4 * 4 * 4 * 4);
  std::vector<FdChainDecl> two{{{"f0", "f1"}}, {{"f2"}}};
  CHECK(check_fd_bound(coreset, two, 3).bound == (1 + 2 * 2) * 3 * 3 * 3);
}

TEST_CASE("coreset matches quantize-then-group-by over the materialized join") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 200; ++trial) {
    auto inst = testing::random_instance(rng);
    auto tuples = testing::naive_join(inst.relations);
    if (testing::naive_count(tuples) == 0) continue;
    const std::size_t kappa = testing::pick(rng, 2, 4);
    auto run = testing::run_coreset(inst, kappa);
    CHECK(testing::as_map(run.coreset) == testing::oracle_coreset(tuples, inst.features, run.dims));
    CHECK(run.coreset.total_weight == testing::naive_count(tuples));
    for (std::size_t j = 0; j < run.dims.size(); ++j) {
      for (std::size_t i = 0; i < run.marginals[j].size(); ++i) {
        CHECK(quantize_value(run.dims[j], run.marginals[j].values[i]) ==
              testing::oracle_quantize(run.dims[j], run.marginals[j].values[i]));
      }
    }
  }
}

TEST_CASE("quantization cost equals the sum of subspace costs") {
  std::mt19937_64 rng(78);
  int checked = 0;
  for (int trial = 0; trial < 200; ++trial) {
    auto inst = testing::random_instance(rng);
    if (compute_join_count(build_join_tree(inst.query, inst.relations)) == 0) continue;
    auto run = testing::run_coreset(inst, testing::pick(rng, 2, 4));
    DataMatrix matrix = materialize_join(run.tree, inst.features);
    double expected = 0;
    for (const auto& d : run.dims) expected += subspace_cost(d);
    CHECK(close(testing::dense_quantization_cost(matrix, run.coreset), expected, 1e-6, 1e-9));
    ++checked;
  }
  CHECK(checked > 100);
}
