#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "rkmeans/schema.hpp"

namespace rkmeans {

inline constexpr std::size_t kNoParent = static_cast<std::size_t>(-1);

struct JoinTreeNode {
  std::shared_ptr<const Relation> relation;
  std::size_t parent = kNoParent;
  std::vector<std::size_t> children;
  // Attributes shared with the parent (the edge label); empty for the root
  // and for cross-product edges.
  std::vector<std::string> shared;
};

// Rooted join tree of an alpha-acyclic natural join. Nodes follow the order
// of the query's relation list.
class JoinTree {
 public:
  JoinTree(std::vector<JoinTreeNode> nodes, std::size_t root);

  std::size_t size() const { return nodes_.size(); }
  std::size_t root() const { return root_; }
  const JoinTreeNode& node(std::size_t i) const { return nodes_[i]; }
  const Relation& relation(std::size_t i) const { return *nodes_[i].relation; }
  std::span<const JoinTreeNode> nodes() const { return nodes_; }

  // Children before parents.
  const std::vector<std::size_t>& post_order() const { return post_order_; }
  // Parents before children.
  std::vector<std::size_t> pre_order() const;

  // Index of the first node (in node order) whose relation holds `attribute`.
  std::size_t owner_of(std::string_view attribute) const;

  // Same tree shape over different relation instances (e.g. after semijoin
  // reduction). `relations` is in node order.
  JoinTree with_relations(std::vector<std::shared_ptr<const Relation>> relations) const;

  // True if every attribute's holders form a connected subtree.
  bool has_running_intersection() const;

 private:
  std::vector<JoinTreeNode> nodes_;
  std::size_t root_;
  std::vector<std::size_t> post_order_;
};

// GYO ear removal. Repeatedly removes the lexicographically smallest ear
// (by relation name), attaching it to the lexicographically smallest witness.
// Throws UnsupportedQueryError when the query is cyclic.
JoinTree build_join_tree(const JoinQuery& query, std::span<const Relation> relations);

}  // namespace rkmeans
