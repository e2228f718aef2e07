#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rkmeans/oracle.hpp"
#include "rkmeans/schema.hpp"

namespace rkmeans {

struct RelationConfig {
  std::string name;
  std::filesystem::path file;  // resolved against the config file's directory
  std::vector<AttributeSpec> attributes;
};

struct RunConfig {
  std::filesystem::path config_path;
  std::vector<RelationConfig> relations;
  JoinQuery query;

  std::size_t k = 0;
  std::optional<std::size_t> kappa;  // defaults to k
  std::uint64_t seed = 0;
  std::size_t max_iter = 100;
  double tol = 1e-4;
  std::map<std::string, double> feature_weights;  // missing features weigh 1
  std::optional<int> continuous_round_decimals;
  std::uint64_t materialization_cap = kDefaultMaterializationCap;
  std::size_t threads = 1;

  std::size_t effective_kappa() const { return kappa.value_or(k); }

  // Throws ConfigError: k >= 1, 2 <= kappa <= k, tol >= 0, max_iter >= 1,
  // threads >= 1, weights name known features and are nonnegative.
  void validate() const;

  // Feature weights in query feature order (empty when all are 1).
  std::vector<double> weight_vector() const;

  nlohmann::json to_json() const;
};

// Parses the JSON config document. Relation file paths are resolved against
// `base_dir`.
RunConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir);
RunConfig load_config(const std::filesystem::path& path);

}  // namespace rkmeans
