#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace rkmeans {

// Parameters of the synthetic database generator.
//
// "star": fact(pid, sid) joined with dimensions P(pid, px, chains...) and
// S(sid, sy). The fact holds `fact_rows` sampled key pairs, or when
// `sparsity` > 0 each of the P x S pairs independently with that
// probability. Join cardinality equals the fact size.
//
// "hub": hub(g) joined with left(g, lx) and right(g, ry); every group has
// `left_per_group` x `right_per_group` join tuples, so the join is much
// larger than its inputs.
struct SynthParams {
  std::string schema = "star";
  std::size_t p_rows = 100;
  std::size_t s_rows = 100;
  std::size_t fact_rows = 1000;
  double sparsity = 0;
  std::size_t groups = 400;
  std::size_t left_per_group = 50;
  std::size_t right_per_group = 50;
  std::size_t clusters = 5;  // planted clusters
  double spread = 1.0;       // per-feature standard deviation inside a cluster
  double center_range = 50;  // cluster centers drawn from [0, center_range)
  int decimals = 1;          // continuous values rounded to this many places
  std::vector<std::size_t> fd_chains;  // star only: lengths of FD chains planted in P
  std::size_t chain_domain = 64;       // categories of each chain's first attribute
  std::size_t k = 5;                   // written into the generated config
  std::uint64_t seed = 1;

  // Throws ConfigError on inconsistent parameters.
  void validate() const;
};

struct SynthResult {
  std::filesystem::path config;
  std::uint64_t join_cardinality = 0;
  std::size_t total_relation_rows = 0;
};

// Writes the relations as CSV plus a config.json into `dir`.
SynthResult generate_synthetic(const SynthParams& params, const std::filesystem::path& dir);

}  // namespace rkmeans
