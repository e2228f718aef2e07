#include "rkmeans/synth.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <random>

#include <json.hpp>

#include "rkmeans/error.hpp"

namespace rkmeans {

void SynthParams::validate() const {
  if (schema != "star" && schema != "hub") throw ConfigError("synth schema must be 'star' or 'hub'");
  if (clusters < 1) throw ConfigError("synth: clusters must be >= 1");
  if (!(spread >= 0) || !(center_range > 0)) throw ConfigError("synth: bad spread or center range");
  if (decimals < 0 || decimals > 6) throw ConfigError("synth: decimals must be in [0, 6]");
  if (k < 1) throw ConfigError("synth: k must be >= 1");
  if (schema == "star") {
    if (p_rows < 1 || s_rows < 1) throw ConfigError("synth: dimension sizes must be positive");
    if (sparsity < 0 || sparsity > 1) throw ConfigError("synth: sparsity must be in [0, 1]");
    if (sparsity == 0 && fact_rows < 1) throw ConfigError("synth: fact_rows must be positive");
    if (chain_domain < 2) throw ConfigError("synth: chain_domain must be >= 2");
    for (auto len : fd_chains) {
      if (len < 1) throw ConfigError("synth: FD chain lengths must be >= 1");
    }
  } else {
    if (groups < 1 || left_per_group < 1 || right_per_group < 1) {
      throw ConfigError("synth: hub sizes must be positive");
    }
    if (!fd_chains.empty()) throw ConfigError("synth: FD chains are only planted in the star schema");
  }
}

namespace {

class Writer {
 public:
  Writer(const std::filesystem::path& path, const std::vector<std::string>& header)
      : out_(path) {
    if (!out_) throw ConfigError("cannot write '" + path.string() + "'");
    for (std::size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << header[i];
    out_ << '\n';
  }
  Writer& field(const std::string& s) {
    out_ << (first_ ? "" : ",") << s;
    first_ = false;
    return *this;
  }
  Writer& field(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return field(std::string(buf, ptr));
  }
  void end() {
    out_ << '\n';
    first_ = true;
    ++rows_;
  }
  std::size_t rows() const { return rows_; }

 private:
  std::ofstream out_;
  bool first_ = true;
  std::size_t rows_ = 0;
};

nlohmann::json attribute(const std::string& name, const char* kind, const char* role) {
  return {{"name", name}, {"kind", kind}, {"role", role}};
}

}  // namespace

SynthResult generate_synthetic(const SynthParams& params, const std::filesystem::path& dir) {
  params.validate();
  std::filesystem::create_directories(dir);
  std::mt19937_64 rng(params.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, params.spread);
  const double scale = std::pow(10.0, params.decimals);
  auto rounded = [&](double v) { return std::round(v * scale) / scale; };

  std::vector<std::array<double, 2>> centers(params.clusters);
  for (auto& c : centers) c = {unit(rng) * params.center_range, unit(rng) * params.center_range};
  auto label = [&] { return static_cast<std::size_t>(unit(rng) * params.clusters) % params.clusters; };

  SynthResult result;
  nlohmann::json config;
  nlohmann::json relations = nlohmann::json::array();
  nlohmann::json features = nlohmann::json::array();
  nlohmann::json chains = nlohmann::json::array();

  if (params.schema == "star") {
    std::vector<std::size_t> p_label(params.p_rows), s_label(params.s_rows);
    std::vector<std::vector<std::size_t>> s_by_label(params.clusters);

    std::vector<std::string> p_header{"pid", "px"};
    nlohmann::json p_attrs = nlohmann::json::array(
        {attribute("pid", "categorical", "join-key"), attribute("px", "continuous", "feature")});
    for (std::size_t a = 0; a < params.fd_chains.size(); ++a) {
      std::vector<std::string> chain;
      for (std::size_t i = 0; i < params.fd_chains[a]; ++i) {
        std::string name = "chain" + std::to_string(a) + "_" + std::to_string(i);
        p_header.push_back(name);
        p_attrs.push_back(attribute(name, "categorical", "feature"));
        chain.push_back(name);
      }
      chains.push_back(chain);
    }
    {
      Writer p(dir / "p.csv", p_header);
      for (std::size_t i = 0; i < params.p_rows; ++i) {
        p_label[i] = label();
        p.field("p" + std::to_string(i)).field(rounded(centers[p_label[i]][0] + noise(rng)));
        for (std::size_t a = 0; a < params.fd_chains.size(); ++a) {
          // Each level halves the previous value, so level i determines i+1.
          auto value = static_cast<std::size_t>(unit(rng) * params.chain_domain) % params.chain_domain;
          for (std::size_t lvl = 0; lvl < params.fd_chains[a]; ++lvl) {
            p.field("a" + std::to_string(a) + "l" + std::to_string(lvl) + "v" + std::to_string(value));
            value /= 2;
          }
        }
        p.end();
      }
      result.total_relation_rows += p.rows();
    }
    {
      Writer s(dir / "s.csv", {"sid", "sy"});
      for (std::size_t i = 0; i < params.s_rows; ++i) {
        s_label[i] = label();
        s_by_label[s_label[i]].push_back(i);
        s.field("s" + std::to_string(i)).field(rounded(centers[s_label[i]][1] + noise(rng))).end();
      }
      result.total_relation_rows += s.rows();
    }
    {
      Writer f(dir / "fact.csv", {"pid", "sid"});
      auto emit = [&](std::size_t p, std::size_t s) {
        f.field("p" + std::to_string(p)).field("s" + std::to_string(s)).end();
      };
      if (params.sparsity > 0) {
        for (std::size_t p = 0; p < params.p_rows; ++p) {
          for (std::size_t s = 0; s < params.s_rows; ++s) {
            if (unit(rng) < params.sparsity) emit(p, s);
          }
        }
      } else {
        for (std::size_t r = 0; r < params.fact_rows; ++r) {
          auto p = static_cast<std::size_t>(unit(rng) * params.p_rows) % params.p_rows;
          const auto& same = s_by_label[p_label[p]];
          std::size_t s;
          if (!same.empty() && unit(rng) < 0.9) {
            s = same[static_cast<std::size_t>(unit(rng) * same.size()) % same.size()];
          } else {
            s = static_cast<std::size_t>(unit(rng) * params.s_rows) % params.s_rows;
          }
          emit(p, s);
        }
      }
      result.join_cardinality = f.rows();
      result.total_relation_rows += f.rows();
    }
    relations.push_back({{"name", "fact"},
                         {"file", "fact.csv"},
                         {"attributes", {attribute("pid", "categorical", "join-key"),
                                         attribute("sid", "categorical", "join-key")}}});
    relations.push_back({{"name", "p"}, {"file", "p.csv"}, {"attributes", p_attrs}});
    relations.push_back({{"name", "s"},
                         {"file", "s.csv"},
                         {"attributes", {attribute("sid", "categorical", "join-key"),
                                         attribute("sy", "continuous", "feature")}}});
    features = {"px", "sy"};
    for (const auto& chain : chains) {
      for (const auto& name : chain) features.push_back(name);
    }
  } else {
    Writer hub(dir / "hub.csv", {"g"});
    Writer left(dir / "left.csv", {"g", "lx"});
    Writer right(dir / "right.csv", {"g", "ry"});
    for (std::size_t g = 0; g < params.groups; ++g) {
      const std::string key = "g" + std::to_string(g);
      const auto& center = centers[label()];
      hub.field(key).end();
      for (std::size_t i = 0; i < params.left_per_group; ++i) {
        left.field(key).field(rounded(center[0] + noise(rng))).end();
      }
      for (std::size_t i = 0; i < params.right_per_group; ++i) {
        right.field(key).field(rounded(center[1] + noise(rng))).end();
      }
    }
    result.join_cardinality = static_cast<std::uint64_t>(params.groups) * params.left_per_group *
                              params.right_per_group;
    result.total_relation_rows = hub.rows() + left.rows() + right.rows();
    relations.push_back({{"name", "hub"},
                         {"file", "hub.csv"},
                         {"attributes", {attribute("g", "categorical", "join-key")}}});
    relations.push_back({{"name", "left"},
                         {"file", "left.csv"},
                         {"attributes", {attribute("g", "categorical", "join-key"),
                                         attribute("lx", "continuous", "feature")}}});
    relations.push_back({{"name", "right"},
                         {"file", "right.csv"},
                         {"attributes", {attribute("g", "categorical", "join-key"),
                                         attribute("ry", "continuous", "feature")}}});
    features = {"lx", "ry"};
  }

  config["relations"] = relations;
  config["features"] = features;
  config["fd_chains"] = chains;
  config["k"] = params.k;
  config["kappa"] = params.k < 2 ? 2 : params.k;
  config["seed"] = params.seed;
  result.config = dir / "config.json";
  std::ofstream out(result.config);
  out << config.dump(2) << '\n';
  return result;
}

}  // namespace rkmeans
