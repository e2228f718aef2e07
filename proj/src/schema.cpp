#include "rkmeans/schema.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "rkmeans/csv.hpp"
#include "rkmeans/error.hpp"

namespace rkmeans {

std::string_view to_string(Kind kind) {
  return kind == Kind::Continuous ? "continuous" : "categorical";
}

std::string_view to_string(Role role) {
  switch (role) {
    case Role::Feature:
      return "feature";
    case Role::JoinKey:
      return "join-key";
    case Role::FeatureAndJoinKey:
      return "feature-and-join-key";
  }
  return "feature";
}

Kind parse_kind(std::string_view text) {
  if (text == "continuous") return Kind::Continuous;
  if (text == "categorical") return Kind::Categorical;
  throw ConfigError("unknown attribute kind '" + std::string(text) + "'");
}

Role parse_role(std::string_view text) {
  if (text == "feature") return Role::Feature;
  if (text == "join-key" || text == "join_key") return Role::JoinKey;
  if (text == "feature-and-join-key" || text == "feature_and_join_key") {
    return Role::FeatureAndJoinKey;
  }
  throw ConfigError("unknown attribute role '" + std::string(text) + "'");
}

Code encode_continuous(double value) {
  if (value == 0.0) value = 0.0;  // fold -0 into +0
  return std::bit_cast<Code>(value);
}

double decode_continuous(Code code) { return std::bit_cast<double>(code); }

Code Dictionary::intern(std::string_view token) {
  std::lock_guard lock(mutex_);
  auto it = ids_.find(std::string(token));
  if (it != ids_.end()) return it->second;
  Code id = tokens_.size();
  tokens_.push_back(std::make_unique<std::string>(token));
  ids_.emplace(*tokens_.back(), id);
  return id;
}

std::optional<Code> Dictionary::find(std::string_view token) const {
  std::lock_guard lock(mutex_);
  auto it = ids_.find(std::string(token));
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

const std::string& Dictionary::token(Code code) const {
  std::lock_guard lock(mutex_);
  if (code >= tokens_.size()) throw ContractViolation("unknown dictionary code");
  return *tokens_[code];
}

std::size_t Dictionary::size() const {
  std::lock_guard lock(mutex_);
  return tokens_.size();
}

Relation::Relation(std::string name, std::vector<AttributeSpec> attributes,
                   std::vector<Code> cells, std::vector<std::uint64_t> multiplicities)
    : name_(std::move(name)), attributes_(std::move(attributes)) {
  const std::size_t width = attributes_.size();
  {
    std::set<std::string> seen;
    for (const auto& a : attributes_) {
      if (!seen.insert(a.name).second) {
        throw ConfigError("duplicate attribute '" + a.name + "' in relation '" + name_ + "'");
      }
    }
  }
  const std::size_t rows = multiplicities.size();
  if (cells.size() != rows * width) {
    throw ContractViolation("relation '" + name_ + "': cell count does not match arity");
  }

  std::vector<std::size_t> order(rows);
  std::iota(order.begin(), order.end(), 0);
  auto row_less = [&](std::size_t a, std::size_t b) {
    return std::lexicographical_compare(cells.begin() + a * width, cells.begin() + (a + 1) * width,
                                        cells.begin() + b * width, cells.begin() + (b + 1) * width);
  };
  auto row_equal = [&](std::size_t a, std::size_t b) {
    return std::equal(cells.begin() + a * width, cells.begin() + (a + 1) * width,
                      cells.begin() + b * width);
  };
  std::stable_sort(order.begin(), order.end(), row_less);

  for (std::size_t i = 0; i < rows;) {
    std::size_t j = i;
    std::uint64_t mult = 0;
    while (j < rows && row_equal(order[i], order[j])) {
      if (__builtin_add_overflow(mult, multiplicities[order[j]], &mult)) {
        throw OverflowError("relation '" + name_ + "': multiplicity overflow");
      }
      ++j;
    }
    if (mult > 0) {
      cells_.insert(cells_.end(), cells.begin() + order[i] * width,
                    cells.begin() + (order[i] + 1) * width);
      multiplicities_.push_back(mult);
    }
    i = j;
  }
}

std::optional<std::size_t> Relation::column_of(std::string_view attribute) const {
  for (std::size_t c = 0; c < attributes_.size(); ++c) {
    if (attributes_[c].name == attribute) return c;
  }
  return std::nullopt;
}

std::uint64_t Relation::total_multiplicity() const {
  std::uint64_t total = 0;
  for (auto m : multiplicities_) {
    if (__builtin_add_overflow(total, m, &total)) throw OverflowError("multiplicity overflow");
  }
  return total;
}

namespace {

double parse_real(std::string_view field, std::size_t row, const std::string& column) {
  double value = 0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  if (!field.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (field.empty() || ec != std::errc() || ptr != last || !std::isfinite(value)) {
    throw LoadError("row " + std::to_string(row) + ", column '" + column +
                    "': cannot parse '" + std::string(field) + "' as a finite real");
  }
  return value;
}

}  // namespace

Relation parse_relation(std::string_view csv_text, std::string name,
                        std::vector<AttributeSpec> spec, Dictionary& dict) {
  CsvReader reader(csv_text);
  std::vector<std::string> header;
  if (!reader.next(header)) {
    throw LoadError("relation '" + name + "': empty file (header row is mandatory)");
  }
  if (!header.empty() && header[0].starts_with("\xEF\xBB\xBF")) header[0].erase(0, 3);

  std::vector<std::size_t> column_of_spec(spec.size());
  for (std::size_t s = 0; s < spec.size(); ++s) {
    auto it = std::find(header.begin(), header.end(), spec[s].name);
    if (it == header.end()) {
      throw LoadError("relation '" + name + "': missing column '" + spec[s].name + "'");
    }
    column_of_spec[s] = static_cast<std::size_t>(it - header.begin());
  }
  if (header.size() != spec.size()) {
    for (const auto& h : header) {
      bool known = std::any_of(spec.begin(), spec.end(), [&](const auto& a) { return a.name == h; });
      if (!known) {
        throw LoadError("relation '" + name + "': unexpected column '" + h + "'");
      }
    }
    throw LoadError("relation '" + name + "': duplicate header columns");
  }

  std::vector<Code> cells;
  std::vector<std::uint64_t> mult;
  std::vector<std::string> fields;
  std::size_t row = 0;
  while (reader.next(fields)) {
    ++row;
    if (fields.size() == 1 && fields[0].empty() && header.size() != 1) continue;  // blank line
    if (fields.size() != header.size()) {
      throw LoadError("relation '" + name + "' row " + std::to_string(row) + ": expected " +
                      std::to_string(header.size()) + " fields, got " +
                      std::to_string(fields.size()));
    }
    for (std::size_t s = 0; s < spec.size(); ++s) {
      const std::string& field = fields[column_of_spec[s]];
      if (spec[s].kind == Kind::Continuous) {
        cells.push_back(encode_continuous(parse_real(field, row, spec[s].name)));
      } else {
        cells.push_back(dict.intern(field));
      }
    }
    mult.push_back(1);
  }
  return Relation(std::move(name), std::move(spec), std::move(cells), std::move(mult));
}

Relation load_relation(const std::filesystem::path& csv_path, std::string name,
                       std::vector<AttributeSpec> spec, Dictionary& dict) {
  std::ifstream in(csv_path, std::ios::binary);
  if (!in) throw LoadError("cannot open '" + csv_path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  try {
    return parse_relation(buffer.str(), std::move(name), std::move(spec), dict);
  } catch (const LoadError& e) {
    throw LoadError(csv_path.string() + ": " + e.what());
  }
}

Relation round_continuous_features(const Relation& relation, int decimals) {
  const double scale = std::pow(10.0, decimals);
  std::vector<Code> cells;
  cells.reserve(relation.size() * relation.arity());
  for (std::size_t r = 0; r < relation.size(); ++r) {
    for (std::size_t c = 0; c < relation.arity(); ++c) {
      const auto& attr = relation.attribute(c);
      Code code = relation.cell(r, c);
      if (attr.kind == Kind::Continuous && attr.role == Role::Feature) {
        code = encode_continuous(std::round(decode_continuous(code) * scale) / scale);
      }
      cells.push_back(code);
    }
  }
  return Relation(relation.name(), relation.attributes(), std::move(cells),
                  {relation.multiplicities().begin(), relation.multiplicities().end()});
}

std::vector<FeatureRef> resolve_features(const JoinQuery& query,
                                         std::span<const Relation> relations) {
  if (query.features.empty()) throw ConfigError("query declares no features");
  auto find_relation = [&](const std::string& name) -> const Relation* {
    for (const auto& r : relations) {
      if (r.name() == name) return &r;
    }
    return nullptr;
  };
  for (const auto& name : query.relations) {
    if (!find_relation(name)) throw ConfigError("query relation '" + name + "' is not loaded");
  }

  std::vector<FeatureRef> out;
  std::set<std::string> seen;
  for (const auto& feature : query.features) {
    if (!seen.insert(feature).second) throw ConfigError("feature '" + feature + "' listed twice");
    std::optional<Kind> kind;
    std::size_t holders = 0;
    bool declared_feature = false;
    for (const auto& name : query.relations) {
      const Relation& rel = *find_relation(name);
      auto col = rel.column_of(feature);
      if (!col) continue;
      const auto& attr = rel.attribute(*col);
      if (kind && *kind != attr.kind) {
        throw ConfigError("attribute '" + feature + "' has inconsistent kinds across relations");
      }
      kind = attr.kind;
      ++holders;
      if (attr.role != Role::JoinKey) declared_feature = true;
    }
    if (!kind) throw ConfigError("feature '" + feature + "' is not an attribute of any relation");
    if (!declared_feature) {
      throw ConfigError("attribute '" + feature + "' is declared join-key only, not a feature");
    }
    if (holders > 1) {
      // A shared attribute must be declared feature-and-join-key somewhere.
      bool ok = false;
      for (const auto& name : query.relations) {
        const Relation& rel = *find_relation(name);
        if (auto col = rel.column_of(feature);
            col && rel.attribute(*col).role == Role::FeatureAndJoinKey) {
          ok = true;
        }
      }
      if (!ok) {
        throw ConfigError("shared attribute '" + feature +
                          "' must be declared feature-and-join-key to be used as a feature");
      }
    }
    out.push_back({feature, *kind});
  }

  std::set<std::string> chained;
  for (const auto& decl : query.fd_chains) {
    if (decl.chain.empty()) throw ConfigError("empty FD chain");
    for (const auto& attr : decl.chain) {
      auto it = std::find_if(out.begin(), out.end(), [&](const auto& f) { return f.attribute == attr; });
      if (it == out.end()) throw ConfigError("FD chain attribute '" + attr + "' is not a feature");
      if (it->kind != Kind::Categorical) {
        throw ConfigError("FD chain attribute '" + attr + "' is not categorical");
      }
      if (!chained.insert(attr).second) {
        throw ConfigError("FD chains are not disjoint at '" + attr + "'");
      }
    }
  }
  return out;
}

FdReport validate_fds(std::span<const FdChainDecl> decls, std::span<const Relation> relations,
                      const Dictionary& dict) {
  FdReport report;
  for (const auto& decl : decls) {
    for (std::size_t i = 0; i + 1 < decl.chain.size(); ++i) {
      const auto& lhs = decl.chain[i];
      const auto& rhs = decl.chain[i + 1];
      bool checked = false;
      for (const auto& rel : relations) {
        auto a = rel.column_of(lhs);
        auto b = rel.column_of(rhs);
        if (!a || !b) continue;
        checked = true;
        std::map<Code, Code> image;
        std::set<Code> reported;
        for (std::size_t r = 0; r < rel.size(); ++r) {
          auto [it, inserted] = image.emplace(rel.cell(r, *a), rel.cell(r, *b));
          if (!inserted && it->second != rel.cell(r, *b) && reported.insert(it->first).second) {
            std::string value = format_value(rel.attribute(*a).kind, it->first, dict);
            report.violations.push_back(
                {lhs, rhs, rel.name(), value,
                 lhs + "=" + value + " maps to more than one " + rhs + " in " + rel.name()});
          }
        }
      }
      if (!checked) {
        report.violations.push_back({lhs, rhs, "", "",
                                     "no relation holds both " + lhs + " and " + rhs});
      }
    }
  }
  return report;
}

std::string format_value(Kind kind, Code code, const Dictionary& dict) {
  if (kind == Kind::Categorical) return dict.token(code);
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), decode_continuous(code));
  return std::string(buf, ptr);
}

}  // namespace rkmeans
