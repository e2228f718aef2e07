#include "rkmeans/join_tree.hpp"

#include <algorithm>
#include <map>
#include <queue>
#include <set>

#include "rkmeans/error.hpp"

namespace rkmeans {

JoinTree::JoinTree(std::vector<JoinTreeNode> nodes, std::size_t root)
    : nodes_(std::move(nodes)), root_(root) {
  if (nodes_.empty() || root_ >= nodes_.size()) {
    throw ContractViolation("join tree needs at least one node and a valid root");
  }
  // Iterative post-order from the root.
  std::vector<std::pair<std::size_t, std::size_t>> stack{{root_, 0}};
  while (!stack.empty()) {
    auto& [node, next_child] = stack.back();
    if (next_child < nodes_[node].children.size()) {
      std::size_t child = nodes_[node].children[next_child++];
      stack.emplace_back(child, 0);
    } else {
      post_order_.push_back(node);
      stack.pop_back();
    }
  }
  if (post_order_.size() != nodes_.size()) {
    throw ContractViolation("join tree does not span all nodes");
  }
}

std::vector<std::size_t> JoinTree::pre_order() const {
  return {post_order_.rbegin(), post_order_.rend()};
}

std::size_t JoinTree::owner_of(std::string_view attribute) const {
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].relation->column_of(attribute)) return i;
  }
  throw ConfigError("attribute '" + std::string(attribute) + "' not found in join tree");
}

JoinTree JoinTree::with_relations(std::vector<std::shared_ptr<const Relation>> relations) const {
  if (relations.size() != nodes_.size()) {
    throw ContractViolation("with_relations: relation count differs from node count");
  }
  auto nodes = nodes_;
  for (std::size_t i = 0; i < nodes.size(); ++i) nodes[i].relation = std::move(relations[i]);
  return JoinTree(std::move(nodes), root_);
}

bool JoinTree::has_running_intersection() const {
  std::set<std::string> attributes;
  for (const auto& n : nodes_) {
    for (const auto& a : n.relation->attributes()) attributes.insert(a.name);
  }
  for (const auto& attr : attributes) {
    std::vector<bool> holds(nodes_.size());
    std::size_t start = kNoParent;
    std::size_t count = 0;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      holds[i] = nodes_[i].relation->column_of(attr).has_value();
      if (holds[i]) {
        ++count;
        if (start == kNoParent) start = i;
      }
    }
    // BFS restricted to holders must reach all of them.
    std::vector<bool> seen(nodes_.size());
    std::queue<std::size_t> frontier;
    frontier.push(start);
    seen[start] = true;
    std::size_t reached = 0;
    while (!frontier.empty()) {
      std::size_t u = frontier.front();
      frontier.pop();
      ++reached;
      std::vector<std::size_t> adjacent = nodes_[u].children;
      if (nodes_[u].parent != kNoParent) adjacent.push_back(nodes_[u].parent);
      for (std::size_t v : adjacent) {
        if (holds[v] && !seen[v]) {
          seen[v] = true;
          frontier.push(v);
        }
      }
    }
    if (reached != count) return false;
  }
  return true;
}

JoinTree build_join_tree(const JoinQuery& query, std::span<const Relation> relations) {
  if (query.relations.empty()) throw ConfigError("query lists no relations");

  std::vector<std::shared_ptr<const Relation>> rels;
  std::vector<std::set<std::string>> attrs;
  {
    std::set<std::string> names;
    for (const auto& name : query.relations) {
      if (!names.insert(name).second) {
        throw ConfigError("relation '" + name + "' listed twice in query");
      }
      auto it = std::find_if(relations.begin(), relations.end(),
                             [&](const Relation& r) { return r.name() == name; });
      if (it == relations.end()) throw ConfigError("query relation '" + name + "' is not loaded");
      rels.push_back(std::make_shared<const Relation>(*it));
      std::set<std::string> a;
      for (const auto& spec : it->attributes()) a.insert(spec.name);
      attrs.push_back(std::move(a));
    }
  }

  const std::size_t n = rels.size();
  std::vector<JoinTreeNode> nodes(n);
  for (std::size_t i = 0; i < n; ++i) nodes[i].relation = rels[i];

  // Remaining relations keyed by name for lexicographic tie-breaking.
  std::map<std::string, std::size_t> remaining;
  for (std::size_t i = 0; i < n; ++i) remaining.emplace(rels[i]->name(), i);

  while (remaining.size() > 1) {
    bool removed = false;
    for (const auto& [ear_name, ear] : remaining) {
      std::set<std::string> shared;
      for (const auto& [other_name, other] : remaining) {
        if (other == ear) continue;
        for (const auto& a : attrs[ear]) {
          if (attrs[other].count(a)) shared.insert(a);
        }
      }
      std::size_t witness = kNoParent;
      for (const auto& [other_name, other] : remaining) {
        if (other == ear) continue;
        if (std::includes(attrs[other].begin(), attrs[other].end(), shared.begin(), shared.end())) {
          witness = other;
          break;
        }
      }
      if (witness == kNoParent) continue;
      nodes[ear].parent = witness;
      nodes[ear].shared.assign(shared.begin(), shared.end());
      nodes[witness].children.push_back(ear);
      remaining.erase(ear_name);
      removed = true;
      break;
    }
    if (!removed) {
      std::string names;
      for (const auto& [name, idx] : remaining) names += (names.empty() ? "" : ", ") + name;
      throw UnsupportedQueryError("query is cyclic: GYO reduction stalls on {" + names + "}");
    }
  }
  for (auto& node : nodes) std::sort(node.children.begin(), node.children.end());
  return JoinTree(std::move(nodes), remaining.begin()->second);
}

}  // namespace rkmeans
