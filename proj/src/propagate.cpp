#include "propagate.hpp"

#include <algorithm>
#include <unordered_map>

namespace rkmeans::detail {

namespace {

struct KeyHash {
  std::size_t operator()(const std::vector<Code>& key) const noexcept {
    std::uint64_t h = 0x9E3779B97F4A7C15ull;
    for (Code c : key) {
      h ^= c + 0x9E3779B97F4A7C15ull + (h << 6) + (h >> 2);
      h *= 0xBF58476D1CE4E5B9ull;
    }
    return static_cast<std::size_t>(h ^ (h >> 31));
  }
};

std::vector<std::size_t> columns_for(const Relation& rel, const std::vector<std::string>& attrs) {
  std::vector<std::size_t> cols;
  for (const auto& a : attrs) cols.push_back(*rel.column_of(a));
  return cols;
}

}  // namespace

TreeIndex::TreeIndex(const JoinTree& tree) : tree_(tree), edges_(tree.size()) {
  for (std::size_t child = 0; child < tree.size(); ++child) {
    const auto& node = tree.node(child);
    if (node.parent == kNoParent) continue;
    const Relation& crel = *node.relation;
    const Relation& prel = tree.relation(node.parent);
    auto ccols = columns_for(crel, node.shared);
    auto pcols = columns_for(prel, node.shared);

    EdgeKeys& edge = edges_[child];
    std::unordered_map<std::vector<Code>, std::uint32_t, KeyHash> ids;
    std::vector<Code> key(ccols.size());
    edge.child_key.resize(crel.size());
    for (std::size_t r = 0; r < crel.size(); ++r) {
      for (std::size_t i = 0; i < ccols.size(); ++i) key[i] = crel.cell(r, ccols[i]);
      auto [it, inserted] = ids.emplace(key, static_cast<std::uint32_t>(ids.size()));
      edge.child_key[r] = it->second;
    }
    edge.key_count = ids.size();
    edge.parent_key.resize(prel.size());
    for (std::size_t r = 0; r < prel.size(); ++r) {
      for (std::size_t i = 0; i < pcols.size(); ++i) key[i] = prel.cell(r, pcols[i]);
      auto it = ids.find(key);
      edge.parent_key[r] = it == ids.end() ? kMissingKey : it->second;
    }
  }
}

GroupAlgebra::Value GroupAlgebra::mul(const Value& a, const Value& b) {
  // Shifting a sorted list by one code keeps it sorted and collision free.
  if (a.size() == 1 || b.size() == 1) {
    const auto& single = a.size() == 1 ? a : b;
    const auto& other = a.size() == 1 ? b : a;
    Value out;
    out.reserve(other.size());
    for (const auto& [code, count] : other) {
      out.emplace_back(checked_add(code, single[0].first), checked_mul(count, single[0].second));
    }
    return out;
  }
  Accumulator acc;
  for (const auto& [ca, na] : a) {
    for (const auto& [cb, nb] : b) {
      auto& slot = acc[checked_add(ca, cb)];
      slot = checked_add(slot, checked_mul(na, nb));
    }
  }
  return finish(acc);
}

GroupAlgebra::Value GroupAlgebra::finish(Accumulator& acc) {
  Value out(acc.begin(), acc.end());
  std::sort(out.begin(), out.end());
  acc.clear();
  return out;
}

}  // namespace rkmeans::detail
