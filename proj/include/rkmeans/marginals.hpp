#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rkmeans/join_tree.hpp"
#include "rkmeans/schema.hpp"

namespace rkmeans {

// Exact join-result weight of every value of one feature. Zero-weight values
// are omitted. Continuous entries are in ascending numeric order, categorical
// entries in ascending token order.
struct MarginalTable {
  std::string feature;
  Kind kind = Kind::Continuous;
  std::vector<Code> values;
  std::vector<std::string> tokens;  // categorical only, parallel to values
  std::vector<std::uint64_t> weights;

  std::size_t size() const { return values.size(); }
  std::uint64_t total() const;
  double value(std::size_t i) const { return decode_continuous(values[i]); }

  static MarginalTable continuous(std::string feature,
                                  std::vector<std::pair<double, std::uint64_t>> entries);
  static MarginalTable categorical(std::string feature,
                                   std::vector<std::pair<std::string, std::uint64_t>> entries,
                                   Dictionary& dict);
};

// A base relation with, per row, the number of join-result rows of its
// subtree that extend the row (multiplicity included).
struct CountAnnotatedRelation {
  std::shared_ptr<const Relation> base;
  std::vector<std::uint64_t> counts;
};

// Total number of tuples in the join result, multiplicities included.
// Bottom-up sum-product message passing; throws OverflowError instead of
// wrapping.
std::uint64_t compute_join_count(const JoinTree& tree);

// Upward pass only, one annotated relation per tree node.
std::vector<CountAnnotatedRelation> annotate_counts(const JoinTree& tree);

// Per-row number of join-result tuples the row participates in (one upward
// and one downward sweep).
std::vector<std::vector<std::uint64_t>> participation_counts(const JoinTree& tree);

// Marginal weights of every feature from a single up/down sweep pair.
std::vector<MarginalTable> compute_marginals(const JoinTree& tree,
                                             std::span<const FeatureRef> features,
                                             const Dictionary& dict);

// Removes dangling rows: every surviving row takes part in at least one join
// result tuple. Join count is unchanged.
JoinTree semijoin_reduce(const JoinTree& tree);

}  // namespace rkmeans
