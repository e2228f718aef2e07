#include "rkmeans/pipeline.hpp"

#include <charconv>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <future>
#include <sstream>

#include <unistd.h>

#include "rkmeans/csv.hpp"
#include "rkmeans/error.hpp"

namespace rkmeans {

using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

// Runs `fn`, prefixing any library error with the step name while keeping
// its type (and thus the CLI exit code).
template <typename Fn>
auto in_step(const char* step, Fn&& fn) -> decltype(fn()) {
  auto prefix = [&](const std::exception& e) { return std::string(step) + ": " + e.what(); };
  try {
    return fn();
  } catch (const LoadError& e) {
    throw LoadError(prefix(e));
  } catch (const ConfigError& e) {
    throw ConfigError(prefix(e));
  } catch (const UnsupportedQueryError& e) {
    throw UnsupportedQueryError(prefix(e));
  } catch (const ResourceCapError& e) {
    throw ResourceCapError(prefix(e));
  } catch (const OverflowError& e) {
    throw OverflowError(prefix(e));
  } catch (const ContractViolation& e) {
    throw ContractViolation(prefix(e));
  }
}

std::string real_text(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

json step_times_json(const StepTimes& t) {
  return {{"step1_marginals", t.step1_marginals},
          {"step2_subspace_solves", t.step2_subspace_solves},
          {"step3_coreset", t.step3_coreset},
          {"step4_lloyd", t.step4_lloyd}};
}

}  // namespace

Database load_database(const RunConfig& config) {
  Database db;
  // Sequential so that dictionary codes do not depend on scheduling.
  for (const auto& rc : config.relations) {
    Relation rel = load_relation(rc.file, rc.name, rc.attributes, *db.dict);
    if (config.continuous_round_decimals) {
      rel = round_continuous_features(rel, *config.continuous_round_decimals);
    }
    db.relations.push_back(std::move(rel));
  }
  return db;
}

JoinTree build_tree(const RunConfig& config, const Database& db) {
  return build_join_tree(config.query, db.relations);
}

json RunReport::to_json() const {
  return {{"step_times_ms", step_times_json(step_times_ms)},
          {"load_ms", load_ms},
          {"total_ms", total_ms},
          {"coreset_size", coreset_size},
          {"join_cardinality", join_cardinality},
          {"objective", objective},
          {"normalized_objective", normalized_objective},
          {"iterations", iterations},
          {"fd_bound", {{"points", fd_bound.points}, {"bound", fd_bound.bound}, {"holds", fd_bound.holds}}},
          {"config", config}};
}

PipelineOutput run_pipeline(const RunConfig& config, const Database& db) {
  config.validate();
  PipelineOutput out;
  out.report.config = config.to_json();
  const std::size_t kappa = config.effective_kappa();
  const auto weights = config.weight_vector();

  auto start = Clock::now();
  auto t0 = Clock::now();
  in_step("step 1 (marginals)", [&] {
    JoinTree tree = build_join_tree(config.query, db.relations);
    out.features = resolve_features(config.query, db.relations);
    if (!config.query.fd_chains.empty()) {
      auto fd = validate_fds(config.query.fd_chains, db.relations, *db.dict);
      if (!fd.valid()) throw ConfigError("declared FD does not hold: " + fd.violations[0].message);
    }
    out.tree = semijoin_reduce(tree);
    out.report.join_cardinality = compute_join_count(*out.tree);
    if (out.report.join_cardinality == 0) throw ConfigError("the join result is empty");
    out.marginals = compute_marginals(*out.tree, out.features, *db.dict);
    return 0;
  });
  out.report.step_times_ms.step1_marginals = ms_since(t0);

  t0 = Clock::now();
  std::vector<SubspaceCentroids> dims = in_step("step 2 (subspace solves)", [&] {
    std::vector<SubspaceCentroids> solved;
    if (config.threads > 1) {
      std::vector<std::future<SubspaceCentroids>> jobs;
      for (const auto& m : out.marginals) {
        jobs.push_back(std::async(std::launch::async, [&m, kappa] { return solve_subspace(m, kappa); }));
      }
      for (auto& j : jobs) solved.push_back(j.get());
    } else {
      for (const auto& m : out.marginals) solved.push_back(solve_subspace(m, kappa));
    }
    return solved;
  });
  out.report.step_times_ms.step2_subspace_solves = ms_since(t0);

  t0 = Clock::now();
  in_step("step 3 (coreset)", [&] {
    auto quantized = quantize_relations(*out.tree, out.features, std::move(dims));
    out.coreset = build_coreset(quantized);
    out.report.fd_bound = check_fd_bound(out.coreset, config.query.fd_chains, kappa);
    return 0;
  });
  out.report.step_times_ms.step3_coreset = ms_since(t0);

  t0 = Clock::now();
  in_step("step 4 (lloyd)", [&] {
    LloydOptions options;
    options.max_iter = config.max_iter;
    options.tol = config.tol;
    options.feature_weights = weights;
    options.threads = config.threads;
    out.clustering = weighted_kmeans(out.coreset, config.k, config.seed, options);
    return 0;
  });
  out.report.step_times_ms.step4_lloyd = ms_since(t0);
  out.report.total_ms = ms_since(start);

  out.report.coreset_size = out.coreset.size();
  out.report.objective = out.clustering.objective;
  out.report.normalized_objective =
      out.clustering.objective / static_cast<double>(out.report.join_cardinality);
  out.report.iterations = out.clustering.iterations;
  return out;
}

PipelineOutput run_pipeline(const RunConfig& config) {
  config.validate();
  auto t0 = Clock::now();
  Database db = in_step("load", [&] { return load_database(config); });
  double load_ms = ms_since(t0);
  PipelineOutput out = run_pipeline(config, db);
  out.report.load_ms = load_ms;
  return out;
}

json BenchReport::to_json() const {
  json doc = {{"join_cardinality", join_cardinality},
              {"coreset_size", coreset_size},
              {"rkmeans_load_ms", rkmeans_load_ms},
              {"rkmeans_ms", rkmeans_ms},
              {"rkmeans_total_with_io_ms", rkmeans_ms + rkmeans_load_ms},
              {"rkmeans_steps_ms", step_times_json(rkmeans_steps_ms)},
              {"baseline_run", baseline_run},
              {"rkmeans_objective", rkmeans_objective}};
  if (baseline_run) {
    doc["matrix_rows"] = matrix_rows;
    doc["materialize_ms"] = materialize_ms;
    doc["baseline_io_ms"] = baseline_io_ms;
    doc["baseline_lloyd_ms"] = baseline_lloyd_ms;
    doc["baseline_total_without_io_ms"] = materialize_ms + baseline_lloyd_ms;
    doc["baseline_total_with_io_ms"] = rkmeans_load_ms + materialize_ms + baseline_io_ms + baseline_lloyd_ms;
    doc["baseline_objective"] = baseline_objective;
    doc["excess_ratio"] = excess_ratio;
  } else {
    doc["baseline_notice"] = baseline_notice;
  }
  return doc;
}

BenchReport run_bench(const RunConfig& config, bool baseline) {
  config.validate();
  BenchReport report;
  auto t0 = Clock::now();
  Database db = in_step("load", [&] { return load_database(config); });
  report.rkmeans_load_ms = ms_since(t0);

  PipelineOutput run = run_pipeline(config, db);
  report.join_cardinality = run.report.join_cardinality;
  report.coreset_size = run.report.coreset_size;
  report.rkmeans_ms = run.report.total_ms;
  report.rkmeans_steps_ms = run.report.step_times_ms;
  if (!baseline) {
    report.baseline_notice = "baseline not requested";
    return report;
  }

  const auto weights = config.weight_vector();
  DataMatrix matrix;
  try {
    t0 = Clock::now();
    JoinTree tree = build_tree(config, db);
    matrix = materialize_join(tree, run.features, config.materialization_cap);
    report.materialize_ms = ms_since(t0);
  } catch (const ResourceCapError& e) {
    report.baseline_notice = std::string("baseline skipped: ") + e.what();
    return report;
  }
  report.baseline_run = true;
  report.matrix_rows = matrix.size();

  // Export and re-import, as a database-to-ML-tool handoff would.
  t0 = Clock::now();
  {
    auto path = std::filesystem::temp_directory_path() /
                ("rkmeans_matrix_" + std::to_string(::getpid()) + ".csv");
    {
      std::ofstream out(path);
      write_matrix_csv(out, matrix, *db.dict);
    }
    std::ifstream in(path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    std::string text = buffer.str();
    CsvReader reader(text);
    std::vector<std::string> fields;
    double checksum = 0;
    while (reader.next(fields)) {
      if (!fields.empty()) {
        double w = 0;
        std::from_chars(fields.back().data(), fields.back().data() + fields.back().size(), w);
        checksum += w;
      }
    }
    std::filesystem::remove(path);
    if (checksum <= 0) throw ContractViolation("matrix export round trip lost the weights");
  }
  report.baseline_io_ms = ms_since(t0);

  t0 = Clock::now();
  Eigen::MatrixXd dense = matrix.dense(weights);
  auto base = dense_weighted_kmeans(dense, matrix.dense_weights(), config.k, config.seed,
                                    config.max_iter, config.tol);
  report.baseline_lloyd_ms = ms_since(t0);

  report.rkmeans_objective = evaluate_objective(matrix, run.clustering.centroids, weights);
  report.baseline_objective = evaluate_objective(matrix, base.centroids, weights);
  report.excess_ratio = report.baseline_objective > 0
                            ? (report.rkmeans_objective - report.baseline_objective) /
                                  report.baseline_objective
                            : 0.0;
  return report;
}

void write_marginals_csv(std::ostream& out, std::span<const MarginalTable> marginals) {
  const std::vector<std::string> header{"feature", "value", "weight"};
  write_csv_record(out, header);
  for (const auto& m : marginals) {
    for (std::size_t i = 0; i < m.size(); ++i) {
      std::string value = m.kind == Kind::Continuous ? real_text(m.value(i)) : m.tokens[i];
      const std::vector<std::string> row{m.feature, value, std::to_string(m.weights[i])};
      write_csv_record(out, row);
    }
  }
}

void write_coreset_csv(std::ostream& out, const GridCoreset& coreset,
                       std::span<const FeatureRef> features) {
  std::vector<std::string> header;
  for (const auto& f : features) header.push_back(f.attribute);
  header.push_back("weight");
  write_csv_record(out, header);
  for (const auto& p : coreset.points) {
    std::vector<std::string> row;
    for (auto id : p.coords) row.push_back(std::to_string(id));
    row.push_back(std::to_string(p.weight));
    write_csv_record(out, row);
  }
}

void write_matrix_csv(std::ostream& out, const DataMatrix& matrix, const Dictionary& dict) {
  std::vector<std::string> header;
  for (const auto& f : matrix.layout) header.push_back(f.name);
  header.push_back("weight");
  write_csv_record(out, header);
  std::vector<std::string> row(matrix.features() + 1);
  for (std::size_t r = 0; r < matrix.size(); ++r) {
    for (std::size_t j = 0; j < matrix.features(); ++j) {
      row[j] = format_value(matrix.layout[j].kind, matrix.cell(r, j), dict);
    }
    row.back() = std::to_string(matrix.weights[r]);
    write_csv_record(out, row);
  }
}

}  // namespace rkmeans
