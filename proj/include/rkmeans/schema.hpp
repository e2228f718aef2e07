#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace rkmeans {

enum class Kind { Continuous, Categorical };
enum class Role { Feature, JoinKey, FeatureAndJoinKey };

std::string_view to_string(Kind kind);
std::string_view to_string(Role role);
Kind parse_kind(std::string_view text);
Role parse_role(std::string_view text);

struct AttributeSpec {
  std::string name;
  Kind kind = Kind::Continuous;
  Role role = Role::Feature;
};

// Every cell is stored as a 64-bit code. Continuous cells hold the IEEE bit
// pattern of the (finite) value, categorical cells hold a Dictionary id.
using Code = std::uint64_t;

Code encode_continuous(double value);
double decode_continuous(Code code);

// Interning table for categorical tokens, shared by all relations of a
// database so that equal tokens get equal codes across relations.
class Dictionary {
 public:
  Code intern(std::string_view token);
  std::optional<Code> find(std::string_view token) const;
  const std::string& token(Code code) const;
  std::size_t size() const;

 private:
  mutable std::mutex mutex_;
  std::unordered_map<std::string, Code> ids_;
  std::vector<std::unique_ptr<std::string>> tokens_;
};

// A base relation in deduplicated form: distinct rows, each with a
// multiplicity >= 1. Immutable after construction.
class Relation {
 public:
  Relation() = default;

  // Collapses exact duplicates (summing multiplicities) and drops rows with
  // multiplicity zero. `cells` is row-major with attributes.size() columns.
  Relation(std::string name, std::vector<AttributeSpec> attributes, std::vector<Code> cells,
           std::vector<std::uint64_t> multiplicities);

  const std::string& name() const { return name_; }
  const std::vector<AttributeSpec>& attributes() const { return attributes_; }
  std::size_t arity() const { return attributes_.size(); }
  std::size_t size() const { return multiplicities_.size(); }

  std::span<const Code> row(std::size_t r) const {
    return {cells_.data() + r * arity(), arity()};
  }
  Code cell(std::size_t r, std::size_t column) const { return cells_[r * arity() + column]; }
  std::uint64_t multiplicity(std::size_t r) const { return multiplicities_[r]; }
  std::span<const std::uint64_t> multiplicities() const { return multiplicities_; }

  std::optional<std::size_t> column_of(std::string_view attribute) const;
  const AttributeSpec& attribute(std::size_t column) const { return attributes_[column]; }

  // Sum of multiplicities, i.e. the raw row count before deduplication.
  std::uint64_t total_multiplicity() const;

 private:
  std::string name_;
  std::vector<AttributeSpec> attributes_;
  std::vector<Code> cells_;
  std::vector<std::uint64_t> multiplicities_;
};

// Parses an RFC-4180 CSV whose header row must name exactly the attributes in
// `spec` (any order). Throws LoadError naming the offending row and column.
Relation load_relation(const std::filesystem::path& csv_path, std::string name,
                       std::vector<AttributeSpec> spec, Dictionary& dict);

// Same as load_relation but from an in-memory CSV document.
Relation parse_relation(std::string_view csv_text, std::string name,
                        std::vector<AttributeSpec> spec, Dictionary& dict);

// Rounds every continuous, non-join-key column to `decimals` places and
// re-deduplicates.
Relation round_continuous_features(const Relation& relation, int decimals);

struct FeatureRef {
  std::string attribute;
  Kind kind = Kind::Continuous;
};

struct FdChainDecl {
  std::vector<std::string> chain;
};

struct JoinQuery {
  std::vector<std::string> relations;
  std::vector<std::string> features;
  std::vector<FdChainDecl> fd_chains;
};

// Checks that every query relation exists and every feature resolves to an
// attribute of matching kind; returns the resolved features in query order.
std::vector<FeatureRef> resolve_features(const JoinQuery& query,
                                         std::span<const Relation> relations);

struct FdViolation {
  std::string determinant;
  std::string dependent;
  std::string relation;
  std::string value;  // determinant token with more than one dependent token
  std::string message;
};

struct FdReport {
  std::vector<FdViolation> violations;
  bool valid() const { return violations.empty(); }
};

// Verifies each consecutive pair of every chain on the relations that hold
// both attributes. A pair that no relation holds together is reported as a
// violation since it cannot be checked.
FdReport validate_fds(std::span<const FdChainDecl> decls, std::span<const Relation> relations,
                      const Dictionary& dict);

// Formats a cell for output: shortest round-trip decimal or the token.
std::string format_value(Kind kind, Code code, const Dictionary& dict);

}  // namespace rkmeans
