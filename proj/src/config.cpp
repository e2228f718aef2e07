#include "rkmeans/config.hpp"

#include <fstream>
#include <set>

#include "rkmeans/error.hpp"

namespace rkmeans {

using nlohmann::json;

namespace {

template <typename T>
T get_or(const json& doc, const char* key, T fallback) {
  if (!doc.contains(key) || doc[key].is_null()) return fallback;
  try {
    return doc[key].get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

}  // namespace

void RunConfig::validate() const {
  if (k < 1) throw ConfigError("k must be at least 1");
  const std::size_t kp = effective_kappa();
  if (kp < 2) throw ConfigError("kappa must be at least 2");
  if (kp > k) {
    throw ConfigError("kappa = " + std::to_string(kp) + " exceeds k = " + std::to_string(k) +
                      "; kappa must not exceed k");
  }
  if (!(tol >= 0)) throw ConfigError("tol must be nonnegative");
  if (max_iter < 1) throw ConfigError("max_iter must be at least 1");
  if (threads < 1) throw ConfigError("threads must be at least 1");
  if (continuous_round_decimals && (*continuous_round_decimals < 0 || *continuous_round_decimals > 15)) {
    throw ConfigError("continuous_round_decimals must be in [0, 15]");
  }
  std::set<std::string> features(query.features.begin(), query.features.end());
  for (const auto& [name, w] : feature_weights) {
    if (!features.count(name)) throw ConfigError("feature weight for unknown feature '" + name + "'");
    if (!(w >= 0)) throw ConfigError("feature weight for '" + name + "' must be nonnegative");
  }
}

std::vector<double> RunConfig::weight_vector() const {
  if (feature_weights.empty()) return {};
  std::vector<double> out;
  for (const auto& f : query.features) {
    auto it = feature_weights.find(f);
    out.push_back(it == feature_weights.end() ? 1.0 : it->second);
  }
  return out;
}

json RunConfig::to_json() const {
  json doc;
  doc["config_path"] = config_path.string();
  json rels = json::array();
  for (const auto& r : relations) {
    json attrs = json::array();
    for (const auto& a : r.attributes) {
      attrs.push_back({{"name", a.name}, {"kind", to_string(a.kind)}, {"role", to_string(a.role)}});
    }
    rels.push_back({{"name", r.name}, {"file", r.file.string()}, {"attributes", attrs}});
  }
  doc["relations"] = rels;
  doc["features"] = query.features;
  json chains = json::array();
  for (const auto& c : query.fd_chains) chains.push_back(c.chain);
  doc["fd_chains"] = chains;
  doc["k"] = k;
  doc["kappa"] = effective_kappa();
  doc["seed"] = seed;
  doc["max_iter"] = max_iter;
  doc["tol"] = tol;
  doc["feature_weights"] = feature_weights;
  doc["continuous_round_decimals"] =
      continuous_round_decimals ? json(*continuous_round_decimals) : json(nullptr);
  doc["materialization_cap"] = materialization_cap;
  doc["threads"] = threads;
  return doc;
}

RunConfig parse_config(const json& doc, const std::filesystem::path& base_dir) {
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  RunConfig cfg;
  if (!doc.contains("relations") || !doc["relations"].is_array() || doc["relations"].empty()) {
    throw ConfigError("config needs a non-empty 'relations' array");
  }
  try {
    for (const auto& r : doc["relations"]) {
      RelationConfig rc;
      rc.name = r.at("name").get<std::string>();
      std::filesystem::path file = r.at("file").get<std::string>();
      rc.file = file.is_absolute() ? file : base_dir / file;
      for (const auto& a : r.at("attributes")) {
        AttributeSpec spec;
        spec.name = a.at("name").get<std::string>();
        spec.kind = parse_kind(a.at("kind").get<std::string>());
        spec.role = a.contains("role") ? parse_role(a["role"].get<std::string>()) : Role::Feature;
        rc.attributes.push_back(std::move(spec));
      }
      cfg.query.relations.push_back(rc.name);
      cfg.relations.push_back(std::move(rc));
    }
    for (const auto& f : doc.at("features")) {
      if (f.is_string()) {
        cfg.query.features.push_back(f.get<std::string>());
      } else {
        cfg.query.features.push_back(f.at("attribute").get<std::string>());
      }
    }
    if (doc.contains("fd_chains")) {
      for (const auto& chain : doc["fd_chains"]) {
        cfg.query.fd_chains.push_back({chain.get<std::vector<std::string>>()});
      }
    }
    if (doc.contains("feature_weights") && !doc["feature_weights"].is_null()) {
      cfg.feature_weights = doc["feature_weights"].get<std::map<std::string, double>>();
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }

  cfg.k = get_or<std::size_t>(doc, "k", 0);
  if (doc.contains("kappa") && !doc["kappa"].is_null()) cfg.kappa = get_or<std::size_t>(doc, "kappa", 0);
  cfg.seed = get_or<std::uint64_t>(doc, "seed", 0);
  cfg.max_iter = get_or<std::size_t>(doc, "max_iter", 100);
  cfg.tol = get_or<double>(doc, "tol", 1e-4);
  if (doc.contains("continuous_round_decimals") && !doc["continuous_round_decimals"].is_null()) {
    cfg.continuous_round_decimals = get_or<int>(doc, "continuous_round_decimals", 0);
  }
  cfg.materialization_cap = get_or<std::uint64_t>(doc, "materialization_cap", kDefaultMaterializationCap);
  cfg.threads = get_or<std::size_t>(doc, "threads", 1);
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  RunConfig cfg = parse_config(doc, path.parent_path());
  cfg.config_path = path;
  return cfg;
}

}  // namespace rkmeans
