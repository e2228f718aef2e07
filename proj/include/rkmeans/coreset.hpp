#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rkmeans/join_tree.hpp"
#include "rkmeans/subspace.hpp"

namespace rkmeans {

// Per-feature radices for packing a grid point into one 64-bit code:
// code = sum_j id_j * stride_j.
class GridPacking {
 public:
  explicit GridPacking(std::vector<std::size_t> radices);

  std::size_t dims() const { return radices_.size(); }
  std::uint64_t stride(std::size_t j) const { return strides_[j]; }
  std::uint64_t pack(std::span<const std::uint32_t> coords) const;
  std::vector<std::uint32_t> unpack(std::uint64_t code) const;

 private:
  std::vector<std::size_t> radices_;
  std::vector<std::uint64_t> strides_;
};

// Name of the synthetic column holding a row's packed partial grid code.
inline constexpr std::string_view kGridColumn = "#grid";

// Same shape as the input tree; each relation keeps only the join keys its
// edges need plus a kGridColumn with the packed centroid ids of the features
// it owns, re-deduplicated.
struct QuantizedTree {
  JoinTree tree;
  GridPacking packing;
  std::vector<SubspaceCentroids> dims;
};

// Nearest centroid id of one cell value: nearest breakpoint for continuous
// features (midpoint ties to the lower id), own id or the light id for
// categorical ones.
std::uint32_t quantize_value(const SubspaceCentroids& dim, Code value);

// Replaces every feature by its nearest subspace centroid id, keeping join
// keys, and re-deduplicates each relation. `dims` follows `features`.
QuantizedTree quantize_relations(const JoinTree& tree, std::span<const FeatureRef> features,
                                 std::vector<SubspaceCentroids> dims);

struct GridPoint {
  std::vector<std::uint32_t> coords;  // one centroid id per feature
  std::uint64_t weight = 0;
};

// Nonzero-weight cells of the grid C_1 x ... x C_m with exact join-count
// weights, sorted by packed code.
struct GridCoreset {
  std::vector<GridPoint> points;
  std::vector<SubspaceCentroids> dims;
  std::uint64_t total_weight = 0;

  std::size_t size() const { return points.size(); }
  std::size_t features() const { return dims.size(); }
};

// Group-by-count aggregation of the quantized join over the join tree.
GridCoreset build_coreset(const QuantizedTree& quantized);

struct FdBoundReport {
  std::size_t points = 0;
  double bound = 0;  // prod_chains (1 + d_i (kappa - 1)) * kappa^(non-chain features)
  bool holds = true;
};

FdBoundReport check_fd_bound(const GridCoreset& coreset, std::span<const FdChainDecl> chains,
                             std::size_t kappa);

}  // namespace rkmeans
