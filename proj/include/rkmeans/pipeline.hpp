#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rkmeans/config.hpp"
#include "rkmeans/coreset.hpp"
#include "rkmeans/lloyd.hpp"
#include "rkmeans/marginals.hpp"

namespace rkmeans {

struct Database {
  std::shared_ptr<Dictionary> dict = std::make_shared<Dictionary>();
  std::vector<Relation> relations;
};

// Loads every relation of the config (applying the rounding knob).
Database load_database(const RunConfig& config);

struct StepTimes {
  double step1_marginals = 0;
  double step2_subspace_solves = 0;
  double step3_coreset = 0;
  double step4_lloyd = 0;
};

struct RunReport {
  StepTimes step_times_ms;
  double load_ms = 0;
  double total_ms = 0;  // steps 1-4
  std::size_t coreset_size = 0;
  std::uint64_t join_cardinality = 0;
  double objective = 0;             // coreset objective, raw weights
  double normalized_objective = 0;  // objective / join_cardinality
  std::size_t iterations = 0;
  FdBoundReport fd_bound;
  nlohmann::json config;

  nlohmann::json to_json() const;
};

struct PipelineOutput {
  RunReport report;
  std::vector<FeatureRef> features;
  std::optional<JoinTree> tree;  // semijoin-reduced
  std::vector<MarginalTable> marginals;
  GridCoreset coreset;
  ClusteringResult clustering;
};

// Steps 1-4: marginals, subspace solves with kappa, grid coreset, Lloyd with
// k. Errors are rethrown with the failing step named.
PipelineOutput run_pipeline(const RunConfig& config, const Database& db);
PipelineOutput run_pipeline(const RunConfig& config);

// Builds the (unreduced) join tree and resolved features for a loaded
// database.
JoinTree build_tree(const RunConfig& config, const Database& db);

struct BenchReport {
  std::uint64_t join_cardinality = 0;
  std::size_t coreset_size = 0;
  double rkmeans_load_ms = 0;
  double rkmeans_ms = 0;  // steps 1-4
  StepTimes rkmeans_steps_ms;
  bool baseline_run = false;
  std::string baseline_notice;
  std::size_t matrix_rows = 0;
  double materialize_ms = 0;
  double baseline_io_ms = 0;  // matrix export and re-import
  double baseline_lloyd_ms = 0;
  double rkmeans_objective = 0;  // evaluated on the full matrix
  double baseline_objective = 0;
  double excess_ratio = 0;  // (rkmeans - baseline) / baseline

  nlohmann::json to_json() const;
};

// Rk-means versus materialize-then-cluster. If the join exceeds the
// materialization cap the baseline is skipped with a notice.
BenchReport run_bench(const RunConfig& config, bool baseline);

void write_marginals_csv(std::ostream& out, std::span<const MarginalTable> marginals);
void write_coreset_csv(std::ostream& out, const GridCoreset& coreset,
                       std::span<const FeatureRef> features);
void write_matrix_csv(std::ostream& out, const DataMatrix& matrix, const Dictionary& dict);

}  // namespace rkmeans
