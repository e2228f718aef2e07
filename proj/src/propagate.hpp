#pragma once

// Sum-product message passing over a join tree, generic in the value algebra.
// Instantiated with plain counts (join cardinality, marginals) and with
// group-by count maps (grid coreset weights).

#include <cstdint>
#include <limits>
#include <string>
#include <unordered_map>
#include <vector>

#include "rkmeans/error.hpp"
#include "rkmeans/join_tree.hpp"

namespace rkmeans::detail {

inline std::uint64_t checked_add(std::uint64_t a, std::uint64_t b) {
  std::uint64_t out;
  if (__builtin_add_overflow(a, b, &out)) throw OverflowError("join count accumulator overflow");
  return out;
}

inline std::uint64_t checked_mul(std::uint64_t a, std::uint64_t b) {
  std::uint64_t out;
  if (__builtin_mul_overflow(a, b, &out)) throw OverflowError("join count accumulator overflow");
  return out;
}

inline constexpr std::uint32_t kMissingKey = std::numeric_limits<std::uint32_t>::max();

// Dense ids for the distinct join-key tuples on the edge between a node and
// its parent.
struct EdgeKeys {
  std::vector<std::uint32_t> child_key;   // per child row
  std::vector<std::uint32_t> parent_key;  // per parent row, kMissingKey if unmatched
  std::size_t key_count = 0;
};

class TreeIndex {
 public:
  explicit TreeIndex(const JoinTree& tree);

  const JoinTree& tree() const { return tree_; }
  // Keys of the edge from `child` to its parent. Undefined for the root.
  const EdgeKeys& edge(std::size_t child) const { return edges_[child]; }

 private:
  const JoinTree& tree_;
  std::vector<EdgeKeys> edges_;
};

struct CountAlgebra {
  using Value = std::uint64_t;
  using Accumulator = std::uint64_t;

  static bool is_zero(const Value& v) { return v == 0; }
  static Value mul(const Value& a, const Value& b) { return checked_mul(a, b); }
  static void accumulate(Accumulator& acc, const Value& v) { acc = checked_add(acc, v); }
  static Value finish(Accumulator& acc) { return acc; }
};

// Sparse map from a packed group-by code to a count. Codes of disjoint
// feature sets combine by addition (mixed-radix packing).
struct GroupAlgebra {
  using Value = std::vector<std::pair<std::uint64_t, std::uint64_t>>;  // sorted by code
  using Accumulator = std::unordered_map<std::uint64_t, std::uint64_t>;

  static bool is_zero(const Value& v) { return v.empty(); }
  static Value mul(const Value& a, const Value& b);
  static void accumulate(Accumulator& acc, const Value& v) {
    for (const auto& [code, count] : v) {
      auto& slot = acc[code];
      slot = checked_add(slot, count);
    }
  }
  static Value finish(Accumulator& acc);
};

template <class Algebra>
struct UpwardResult {
  using Value = typename Algebra::Value;
  // Per node, per row: the row's value times all child messages.
  std::vector<std::vector<Value>> rows;
  // Per non-root node: message to the parent indexed by edge key id.
  std::vector<std::vector<Value>> messages;
  typename Algebra::Value total{};
};

// `row_value(node, row)` gives the seed value of a row before child messages
// are multiplied in.
template <class Algebra, class RowValue>
UpwardResult<Algebra> upward_pass(const TreeIndex& index, RowValue&& row_value,
                                  bool keep_rows) {
  const JoinTree& tree = index.tree();
  UpwardResult<Algebra> result;
  result.messages.resize(tree.size());
  if (keep_rows) result.rows.resize(tree.size());

  typename Algebra::Accumulator root_acc{};
  for (std::size_t node : tree.post_order()) {
    const Relation& rel = tree.relation(node);
    const auto& children = tree.node(node).children;
    const bool is_root = node == tree.root();

    std::vector<typename Algebra::Accumulator> outgoing;
    if (!is_root) outgoing.resize(index.edge(node).key_count);
    if (keep_rows) result.rows[node].resize(rel.size());

    for (std::size_t r = 0; r < rel.size(); ++r) {
      typename Algebra::Value value = row_value(node, r);
      for (std::size_t child : children) {
        if (Algebra::is_zero(value)) break;
        std::uint32_t key = index.edge(child).parent_key[r];
        if (key == kMissingKey) {
          value = {};
          break;
        }
        value = Algebra::mul(value, result.messages[child][key]);
      }
      if (Algebra::is_zero(value)) continue;
      if (is_root) {
        Algebra::accumulate(root_acc, value);
      } else {
        Algebra::accumulate(outgoing[index.edge(node).child_key[r]], value);
      }
      if (keep_rows) result.rows[node][r] = std::move(value);
    }

    if (!is_root) {
      auto& msg = result.messages[node];
      msg.resize(outgoing.size());
      for (std::size_t k = 0; k < outgoing.size(); ++k) msg[k] = Algebra::finish(outgoing[k]);
    }
  }
  result.total = Algebra::finish(root_acc);
  return result;
}

}  // namespace rkmeans::detail
