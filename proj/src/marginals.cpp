#include "rkmeans/marginals.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <unordered_map>

#include "propagate.hpp"
#include "rkmeans/error.hpp"

namespace rkmeans {

using detail::checked_add;
using detail::checked_mul;
using detail::CountAlgebra;
using detail::kMissingKey;
using detail::TreeIndex;

std::uint64_t MarginalTable::total() const {
  std::uint64_t sum = 0;
  for (auto w : weights) sum = checked_add(sum, w);
  return sum;
}

MarginalTable MarginalTable::continuous(std::string feature,
                                        std::vector<std::pair<double, std::uint64_t>> entries) {
  std::map<double, std::uint64_t> merged;
  for (auto [v, w] : entries) {
    if (w > 0) merged[v == 0.0 ? 0.0 : v] += w;
  }
  MarginalTable t;
  t.feature = std::move(feature);
  t.kind = Kind::Continuous;
  for (auto [v, w] : merged) {
    t.values.push_back(encode_continuous(v));
    t.weights.push_back(w);
  }
  return t;
}

MarginalTable MarginalTable::categorical(std::string feature,
                                         std::vector<std::pair<std::string, std::uint64_t>> entries,
                                         Dictionary& dict) {
  std::map<std::string, std::uint64_t> merged;
  for (auto& [token, w] : entries) {
    if (w > 0) merged[token] += w;
  }
  MarginalTable t;
  t.feature = std::move(feature);
  t.kind = Kind::Categorical;
  for (auto& [token, w] : merged) {
    t.values.push_back(dict.intern(token));
    t.tokens.push_back(token);
    t.weights.push_back(w);
  }
  return t;
}

namespace {

detail::UpwardResult<CountAlgebra> count_upward(const TreeIndex& index, bool keep_rows) {
  const JoinTree& tree = index.tree();
  return detail::upward_pass<CountAlgebra>(
      index, [&](std::size_t node, std::size_t row) { return tree.relation(node).multiplicity(row); },
      keep_rows);
}

// Per node, per row: number of join tuples outside the row's subtree that
// are compatible with it (1 at the root).
std::vector<std::vector<std::uint64_t>> downward_pass(
    const TreeIndex& index, const detail::UpwardResult<CountAlgebra>& up) {
  const JoinTree& tree = index.tree();
  std::vector<std::vector<std::uint64_t>> down(tree.size());
  down[tree.root()].assign(tree.relation(tree.root()).size(), 1);

  for (std::size_t node : tree.pre_order()) {
    const Relation& rel = tree.relation(node);
    const auto& children = tree.node(node).children;
    if (children.empty()) continue;

    std::vector<std::vector<std::uint64_t>> to_child(children.size());
    for (std::size_t i = 0; i < children.size(); ++i) {
      to_child[i].assign(index.edge(children[i]).key_count, 0);
    }
    const std::size_t t = children.size();
    std::vector<std::uint64_t> incoming(t), prefix(t + 1), suffix(t + 1);
    for (std::size_t r = 0; r < rel.size(); ++r) {
      std::uint64_t outside = down[node][r];
      if (outside == 0) continue;
      bool matched = true;
      for (std::size_t i = 0; i < t; ++i) {
        std::uint32_t key = index.edge(children[i]).parent_key[r];
        if (key == kMissingKey) {
          matched = false;
          break;
        }
        incoming[i] = up.messages[children[i]][key];
      }
      if (!matched) continue;
      prefix[0] = 1;
      for (std::size_t i = 0; i < t; ++i) prefix[i + 1] = checked_mul(prefix[i], incoming[i]);
      suffix[t] = 1;
      for (std::size_t i = t; i-- > 0;) suffix[i] = checked_mul(suffix[i + 1], incoming[i]);
      const std::uint64_t base = checked_mul(outside, rel.multiplicity(r));
      for (std::size_t i = 0; i < t; ++i) {
        std::uint64_t others = checked_mul(prefix[i], suffix[i + 1]);
        auto& slot = to_child[i][index.edge(children[i]).parent_key[r]];
        slot = checked_add(slot, checked_mul(base, others));
      }
    }
    for (std::size_t i = 0; i < t; ++i) {
      std::size_t child = children[i];
      const auto& keys = index.edge(child).child_key;
      down[child].resize(keys.size());
      for (std::size_t r = 0; r < keys.size(); ++r) down[child][r] = to_child[i][keys[r]];
    }
  }
  return down;
}

}  // namespace

std::uint64_t compute_join_count(const JoinTree& tree) {
  TreeIndex index(tree);
  return count_upward(index, false).total;
}

std::vector<CountAnnotatedRelation> annotate_counts(const JoinTree& tree) {
  TreeIndex index(tree);
  auto up = count_upward(index, true);
  std::vector<CountAnnotatedRelation> out;
  for (std::size_t n = 0; n < tree.size(); ++n) {
    out.push_back({tree.node(n).relation, std::move(up.rows[n])});
  }
  return out;
}

std::vector<std::vector<std::uint64_t>> participation_counts(const JoinTree& tree) {
  TreeIndex index(tree);
  auto up = count_upward(index, true);
  auto down = downward_pass(index, up);
  for (std::size_t n = 0; n < tree.size(); ++n) {
    for (std::size_t r = 0; r < down[n].size(); ++r) {
      down[n][r] = down[n][r] == 0 ? 0 : checked_mul(down[n][r], up.rows[n][r]);
    }
  }
  return down;
}

std::vector<MarginalTable> compute_marginals(const JoinTree& tree,
                                             std::span<const FeatureRef> features,
                                             const Dictionary& dict) {
  auto full = participation_counts(tree);
  std::vector<MarginalTable> out;
  for (const auto& feature : features) {
    std::size_t owner = tree.owner_of(feature.attribute);
    const Relation& rel = tree.relation(owner);
    std::size_t col = *rel.column_of(feature.attribute);
    std::unordered_map<Code, std::uint64_t> sums;
    for (std::size_t r = 0; r < rel.size(); ++r) {
      if (full[owner][r] == 0) continue;
      auto& slot = sums[rel.cell(r, col)];
      slot = checked_add(slot, full[owner][r]);
    }

    MarginalTable table;
    table.feature = feature.attribute;
    table.kind = feature.kind;
    std::vector<std::pair<Code, std::uint64_t>> entries(sums.begin(), sums.end());
    if (feature.kind == Kind::Continuous) {
      std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
        return decode_continuous(a.first) < decode_continuous(b.first);
      });
    } else {
      std::sort(entries.begin(), entries.end(), [&](const auto& a, const auto& b) {
        return dict.token(a.first) < dict.token(b.first);
      });
    }
    for (const auto& [code, weight] : entries) {
      table.values.push_back(code);
      if (feature.kind == Kind::Categorical) table.tokens.push_back(dict.token(code));
      table.weights.push_back(weight);
    }
    out.push_back(std::move(table));
  }
  return out;
}

JoinTree semijoin_reduce(const JoinTree& tree) {
  auto full = participation_counts(tree);
  std::vector<std::shared_ptr<const Relation>> reduced;
  for (std::size_t n = 0; n < tree.size(); ++n) {
    const Relation& rel = tree.relation(n);
    std::vector<Code> cells;
    std::vector<std::uint64_t> mult;
    for (std::size_t r = 0; r < rel.size(); ++r) {
      if (full[n][r] == 0) continue;
      auto row = rel.row(r);
      cells.insert(cells.end(), row.begin(), row.end());
      mult.push_back(rel.multiplicity(r));
    }
    if (mult.size() == rel.size()) {
      reduced.push_back(tree.node(n).relation);
    } else {
      reduced.push_back(std::make_shared<const Relation>(rel.name(), rel.attributes(),
                                                         std::move(cells), std::move(mult)));
    }
  }
  return tree.with_relations(std::move(reduced));
}

}  // namespace rkmeans
