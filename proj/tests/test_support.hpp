#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "rkmeans/marginals.hpp"
#include "rkmeans/schema.hpp"

namespace rkmeans::testing {

struct Instance {
  std::shared_ptr<Dictionary> dict = std::make_shared<Dictionary>();
  std::vector<Relation> relations;
  JoinQuery query;
  std::vector<FeatureRef> features;
};

struct InstanceShape {
  std::size_t min_relations = 2;
  std::size_t max_relations = 4;
  std::size_t max_rows = 8;
  std::size_t key_domain = 3;
  std::size_t value_domain = 4;
  std::uint64_t max_multiplicity = 3;
};

inline std::size_t pick(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

// Random tree-shaped schema. Relation i > 0 shares key "k<i>" with a random
// earlier relation, sometimes also a second key or a key that doubles as a
// feature. Each relation owns zero to two features.
inline Instance random_instance(std::mt19937_64& rng, const InstanceShape& shape = {}) {
  Instance inst;
  const std::size_t n = pick(rng, shape.min_relations, shape.max_relations);
  std::vector<std::vector<AttributeSpec>> attrs(n);
  std::vector<std::string> feature_names;
  for (std::size_t i = 1; i < n; ++i) {
    const std::size_t parent = pick(rng, 0, i - 1);
    const std::string key = "k" + std::to_string(i);
    const bool feature_key = pick(rng, 0, 4) == 0;
    const Role role = feature_key ? Role::FeatureAndJoinKey : Role::JoinKey;
    attrs[i].push_back({key, Kind::Categorical, role});
    attrs[parent].push_back({key, Kind::Categorical, role});
    if (feature_key) feature_names.push_back(key);
    if (pick(rng, 0, 3) == 0) {
      const std::string key2 = "q" + std::to_string(i);
      attrs[i].push_back({key2, Kind::Continuous, Role::JoinKey});
      attrs[parent].push_back({key2, Kind::Continuous, Role::JoinKey});
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t count = pick(rng, i == 0 ? 1 : 0, 2);
    for (std::size_t f = 0; f < count; ++f) {
      const bool categorical = pick(rng, 0, 1) == 0;
      std::string name = (categorical ? "c" : "x") + std::to_string(i) + "_" + std::to_string(f);
      attrs[i].push_back({name, categorical ? Kind::Categorical : Kind::Continuous, Role::Feature});
      feature_names.push_back(name);
    }
  }
  std::shuffle(feature_names.begin(), feature_names.end(), rng);

  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t rows = pick(rng, 1, shape.max_rows);
    std::vector<Code> cells;
    std::vector<std::uint64_t> mults;
    for (std::size_t r = 0; r < rows; ++r) {
      for (const auto& a : attrs[i]) {
        const bool is_key = a.role != Role::Feature;
        const std::size_t domain = is_key ? shape.key_domain : shape.value_domain;
        const std::size_t v = pick(rng, 0, domain - 1);
        if (a.kind == Kind::Categorical) {
          cells.push_back(inst.dict->intern(a.name + "=" + std::to_string(v)));
        } else {
          cells.push_back(encode_continuous(is_key ? double(v) : 0.5 * double(v) - 1.0));
        }
      }
      mults.push_back(pick(rng, 1, shape.max_multiplicity));
    }
    std::string name = "r" + std::to_string(i);
    inst.relations.emplace_back(name, attrs[i], std::move(cells), std::move(mults));
    inst.query.relations.push_back(name);
  }
  inst.query.features = feature_names;
  inst.features = resolve_features(inst.query, inst.relations);
  return inst;
}

// One join-result tuple: attribute name -> code, with its multiplicity.
struct JoinTuple {
  std::map<std::string, Code> values;
  std::uint64_t weight = 0;
};

// Natural join by backtracking over the relations in list order, checking
// every shared attribute by name. Independent of the join tree.
inline std::vector<JoinTuple> naive_join(const std::vector<Relation>& relations) {
  std::vector<JoinTuple> out;
  JoinTuple current;
  current.weight = 1;
  auto rec = [&](auto&& self, std::size_t i) -> void {
    if (i == relations.size()) {
      out.push_back(current);
      return;
    }
    const Relation& rel = relations[i];
    for (std::size_t r = 0; r < rel.size(); ++r) {
      JoinTuple saved = current;
      bool ok = true;
      for (std::size_t c = 0; c < rel.arity() && ok; ++c) {
        auto [it, inserted] = current.values.emplace(rel.attribute(c).name, rel.cell(r, c));
        if (!inserted && it->second != rel.cell(r, c)) ok = false;
      }
      if (ok) {
        current.weight *= rel.multiplicity(r);
        self(self, i + 1);
      }
      current = std::move(saved);
    }
  };
  rec(rec, 0);
  return out;
}

inline std::uint64_t naive_count(const std::vector<JoinTuple>& tuples) {
  std::uint64_t total = 0;
  for (const auto& t : tuples) total += t.weight;
  return total;
}

// Group-by count of one attribute over the join.
inline std::map<Code, std::uint64_t> naive_marginal(const std::vector<JoinTuple>& tuples,
                                                    const std::string& attribute) {
  std::map<Code, std::uint64_t> out;
  for (const auto& t : tuples) out[t.values.at(attribute)] += t.weight;
  return out;
}

inline bool close(double a, double b, double rel, double abs = 0) {
  return std::abs(a - b) <= std::max(abs, rel * std::max(std::abs(a), std::abs(b)));
}

}  // namespace rkmeans::testing
