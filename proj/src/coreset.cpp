#include "rkmeans/coreset.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "propagate.hpp"
#include "rkmeans/error.hpp"

namespace rkmeans {

GridPacking::GridPacking(std::vector<std::size_t> radices) : radices_(std::move(radices)) {
  std::uint64_t stride = 1;
  for (std::size_t r : radices_) {
    if (r == 0) throw ContractViolation("grid packing: zero radix");
    strides_.push_back(stride);
    if (__builtin_mul_overflow(stride, static_cast<std::uint64_t>(r), &stride)) {
      throw OverflowError("grid has more than 2^64 cells; reduce kappa or the feature count");
    }
  }
}

std::uint64_t GridPacking::pack(std::span<const std::uint32_t> coords) const {
  std::uint64_t code = 0;
  for (std::size_t j = 0; j < coords.size(); ++j) code += coords[j] * strides_[j];
  return code;
}

std::vector<std::uint32_t> GridPacking::unpack(std::uint64_t code) const {
  std::vector<std::uint32_t> coords(radices_.size());
  for (std::size_t j = 0; j < radices_.size(); ++j) {
    coords[j] = static_cast<std::uint32_t>(code % radices_[j]);
    code /= radices_[j];
  }
  return coords;
}

std::uint32_t quantize_value(const SubspaceCentroids& dim, Code value) {
  if (const auto* c = std::get_if<ContinuousCentroids>(&dim)) {
    return c->nearest(decode_continuous(value));
  }
  return std::get<CategoricalCentroids>(dim).centroid_of(value);
}

QuantizedTree quantize_relations(const JoinTree& tree, std::span<const FeatureRef> features,
                                 std::vector<SubspaceCentroids> dims) {
  if (dims.size() != features.size()) {
    throw ContractViolation("quantize_relations: one subspace solution per feature required");
  }
  std::vector<std::size_t> radices;
  for (std::size_t j = 0; j < dims.size(); ++j) {
    if (subspace_feature(dims[j]) != features[j].attribute) {
      throw ContractViolation("quantize_relations: subspace order does not match features");
    }
    radices.push_back(centroid_count(dims[j]));
  }
  GridPacking packing(std::move(radices));

  std::vector<std::vector<std::size_t>> owned(tree.size());
  for (std::size_t j = 0; j < features.size(); ++j) {
    owned[tree.owner_of(features[j].attribute)].push_back(j);
  }

  std::vector<std::shared_ptr<const Relation>> quantized;
  for (std::size_t n = 0; n < tree.size(); ++n) {
    const Relation& rel = tree.relation(n);
    std::set<std::string> keys(tree.node(n).shared.begin(), tree.node(n).shared.end());
    for (std::size_t child : tree.node(n).children) {
      keys.insert(tree.node(child).shared.begin(), tree.node(child).shared.end());
    }
    std::vector<AttributeSpec> attrs;
    std::vector<std::size_t> key_cols;
    for (const auto& k : keys) {
      std::size_t col = *rel.column_of(k);
      key_cols.push_back(col);
      attrs.push_back({k, rel.attribute(col).kind, Role::JoinKey});
    }
    attrs.push_back({std::string(kGridColumn), Kind::Categorical, Role::Feature});

    std::vector<std::size_t> feature_cols;
    for (std::size_t j : owned[n]) feature_cols.push_back(*rel.column_of(features[j].attribute));

    std::vector<Code> cells;
    cells.reserve(rel.size() * attrs.size());
    for (std::size_t r = 0; r < rel.size(); ++r) {
      for (std::size_t col : key_cols) cells.push_back(rel.cell(r, col));
      std::uint64_t code = 0;
      for (std::size_t i = 0; i < owned[n].size(); ++i) {
        std::size_t j = owned[n][i];
        code += quantize_value(dims[j], rel.cell(r, feature_cols[i])) * packing.stride(j);
      }
      cells.push_back(code);
    }
    quantized.push_back(std::make_shared<const Relation>(
        rel.name(), std::move(attrs), std::move(cells),
        std::vector<std::uint64_t>(rel.multiplicities().begin(), rel.multiplicities().end())));
  }
  return {tree.with_relations(std::move(quantized)), std::move(packing), std::move(dims)};
}

GridCoreset build_coreset(const QuantizedTree& quantized) {
  const JoinTree& tree = quantized.tree;
  detail::TreeIndex index(tree);
  std::vector<std::size_t> grid_col(tree.size());
  for (std::size_t n = 0; n < tree.size(); ++n) {
    auto col = tree.relation(n).column_of(kGridColumn);
    if (!col) throw ContractViolation("build_coreset: relation is not quantized");
    grid_col[n] = *col;
  }
  auto up = detail::upward_pass<detail::GroupAlgebra>(
      index,
      [&](std::size_t node, std::size_t row) {
        const Relation& rel = tree.relation(node);
        return detail::GroupAlgebra::Value{{rel.cell(row, grid_col[node]), rel.multiplicity(row)}};
      },
      false);

  GridCoreset coreset;
  coreset.dims = quantized.dims;
  coreset.points.reserve(up.total.size());
  for (const auto& [code, weight] : up.total) {
    coreset.points.push_back({quantized.packing.unpack(code), weight});
    coreset.total_weight = detail::checked_add(coreset.total_weight, weight);
  }
  return coreset;
}

FdBoundReport check_fd_bound(const GridCoreset& coreset, std::span<const FdChainDecl> chains,
                             std::size_t kappa) {
  FdBoundReport report;
  report.points = coreset.size();
  long double bound = 1;
  std::size_t chained = 0;
  for (const auto& decl : chains) {
    bound *= 1.0L + static_cast<long double>(decl.chain.size()) * (kappa - 1.0L);
    chained += decl.chain.size();
  }
  const std::size_t free_features = coreset.features() >= chained ? coreset.features() - chained : 0;
  bound *= std::pow(static_cast<long double>(kappa), static_cast<long double>(free_features));
  report.bound = static_cast<double>(bound);
  report.holds = static_cast<long double>(report.points) <= bound;
  return report;
}

}  // namespace rkmeans
