#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "rkmeans/error.hpp"
#include "rkmeans/pipeline.hpp"
#include "rkmeans/synth.hpp"

using namespace rkmeans;

namespace {

struct Overrides {
  std::optional<std::size_t> k;
  std::optional<std::size_t> kappa;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> max_iter;
  std::optional<double> tol;
  std::optional<std::size_t> threads;
  std::optional<std::uint64_t> cap;
  std::optional<int> round;

  void attach(CLI::App* cmd) {
    cmd->add_option("--k", k, "number of clusters");
    cmd->add_option("--kappa", kappa, "centroids per feature (default k)");
    cmd->add_option("--seed", seed, "random seed");
    cmd->add_option("--max-iter", max_iter, "Lloyd iteration cap");
    cmd->add_option("--tol", tol, "relative objective decrease to stop at");
    cmd->add_option("--threads", threads, "worker threads");
    cmd->add_option("--cap", cap, "materialization cap (join rows)");
    cmd->add_option("--round", round, "round continuous features to this many decimals");
  }

  RunConfig apply(const std::string& path) const {
    RunConfig cfg = load_config(path);
    if (k) cfg.k = *k;
    if (kappa) cfg.kappa = *kappa;
    if (seed) cfg.seed = *seed;
    if (max_iter) cfg.max_iter = *max_iter;
    if (tol) cfg.tol = *tol;
    if (threads) cfg.threads = *threads;
    if (cap) cfg.materialization_cap = *cap;
    if (round) cfg.continuous_round_decimals = *round;
    cfg.validate();
    return cfg;
  }
};

void write_json(const std::string& path, const nlohmann::json& doc) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << doc.dump(2) << '\n';
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  return out;
}

void print_row(const char* label, double ms) { std::printf("  %-24s %12.3f ms\n", label, ms); }

void print_report(const RunReport& r) {
  std::printf("join cardinality |X|   %llu\n", static_cast<unsigned long long>(r.join_cardinality));
  std::printf("coreset size |G|       %zu\n", r.coreset_size);
  std::printf("objective              %.10g\n", r.objective);
  std::printf("normalized objective   %.10g\n", r.normalized_objective);
  std::printf("iterations             %zu\n", r.iterations);
  if (r.fd_bound.bound > 0) {
    std::printf("FD bound               %zu <= %.0f (%s)\n", r.fd_bound.points, r.fd_bound.bound,
                r.fd_bound.holds ? "holds" : "VIOLATED");
  }
  std::printf("timings\n");
  print_row("load", r.load_ms);
  print_row("step 1 marginals", r.step_times_ms.step1_marginals);
  print_row("step 2 subspace solves", r.step_times_ms.step2_subspace_solves);
  print_row("step 3 coreset", r.step_times_ms.step3_coreset);
  print_row("step 4 lloyd", r.step_times_ms.step4_lloyd);
  print_row("total (steps 1-4)", r.total_ms);
}

int exit_code(const std::exception& e) {
  if (dynamic_cast<const UnsupportedQueryError*>(&e)) return 2;
  if (dynamic_cast<const ResourceCapError*>(&e)) return 3;
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rk-means: k-means over acyclic joins via a grid coreset"};
  app.require_subcommand(1);

  std::string config_path;
  Overrides overrides;

  auto* cluster = app.add_subcommand("cluster", "run the pipeline and write centroids");
  std::string centroids_path = "centroids.csv";
  std::string report_path = "report.json";
  cluster->add_option("config", config_path, "config JSON")->required();
  cluster->add_option("--centroids", centroids_path, "centroids CSV output");
  cluster->add_option("--report", report_path, "report JSON output");
  overrides.attach(cluster);

  auto* bench = app.add_subcommand("bench", "compare against materialize-then-cluster");
  bool baseline = false;
  std::string bench_report = "bench.json";
  bench->add_option("config", config_path, "config JSON")->required();
  bench->add_flag("--baseline", baseline, "also run the materialized baseline");
  bench->add_option("--report", bench_report, "bench report JSON output");
  overrides.attach(bench);

  auto* materialize = app.add_subcommand("materialize", "write the coreset or the full matrix");
  std::string coreset_out, matrix_out;
  materialize->add_option("config", config_path, "config JSON")->required();
  materialize->add_option("--coreset", coreset_out, "grid coreset CSV output");
  materialize->add_option("--matrix", matrix_out, "materialized join CSV output");
  overrides.attach(materialize);

  auto* validate = app.add_subcommand("validate", "check the schema, query and FDs");
  std::string marginals_out;
  validate->add_option("config", config_path, "config JSON")->required();
  validate->add_option("--marginals", marginals_out, "marginal weights CSV output");

  auto* synth = app.add_subcommand("synth", "generate a synthetic database");
  SynthParams params;
  std::string synth_dir;
  synth->add_option("dir", synth_dir, "output directory")->required();
  synth->add_option("--schema", params.schema, "star or hub");
  synth->add_option("--p-rows", params.p_rows);
  synth->add_option("--s-rows", params.s_rows);
  synth->add_option("--fact-rows", params.fact_rows);
  synth->add_option("--sparsity", params.sparsity, "keep each P x S pair with this probability");
  synth->add_option("--groups", params.groups);
  synth->add_option("--left-per-group", params.left_per_group);
  synth->add_option("--right-per-group", params.right_per_group);
  synth->add_option("--clusters", params.clusters, "planted clusters");
  synth->add_option("--spread", params.spread);
  synth->add_option("--decimals", params.decimals);
  synth->add_option("--fd-chain", params.fd_chains, "length of a planted FD chain (repeatable)");
  synth->add_option("--chain-domain", params.chain_domain);
  synth->add_option("--k", params.k);
  synth->add_option("--seed", params.seed);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*cluster) {
      RunConfig cfg = overrides.apply(config_path);
      auto t0 = std::chrono::steady_clock::now();
      auto db = load_database(cfg);
      double load_ms =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      PipelineOutput out = run_pipeline(cfg, db);
      out.report.load_ms = load_ms;
      auto centroids = open_out(centroids_path);
      write_centroids_csv(centroids, out.clustering.centroids, out.features, *db.dict);
      write_json(report_path, out.report.to_json());
      print_report(out.report);
    } else if (*bench) {
      RunConfig cfg = overrides.apply(config_path);
      BenchReport r = run_bench(cfg, baseline);
      write_json(bench_report, r.to_json());
      std::printf("join cardinality |X|   %llu\n", static_cast<unsigned long long>(r.join_cardinality));
      std::printf("coreset size |G|       %zu\n", r.coreset_size);
      std::printf("rk-means\n");
      print_row("load", r.rkmeans_load_ms);
      print_row("steps 1-4", r.rkmeans_ms);
      if (r.baseline_run) {
        std::printf("baseline\n");
        print_row("materialize", r.materialize_ms);
        print_row("export/import", r.baseline_io_ms);
        print_row("lloyd", r.baseline_lloyd_ms);
        print_row("total without I/O", r.materialize_ms + r.baseline_lloyd_ms);
        std::printf("objective rk-means     %.10g\n", r.rkmeans_objective);
        std::printf("objective baseline     %.10g\n", r.baseline_objective);
        std::printf("excess ratio           %.6f\n", r.excess_ratio);
      } else {
        std::printf("%s\n", r.baseline_notice.c_str());
      }
    } else if (*materialize) {
      if (coreset_out.empty() && matrix_out.empty()) {
        throw ConfigError("materialize needs --coreset or --matrix");
      }
      RunConfig cfg = overrides.apply(config_path);
      auto db = load_database(cfg);
      if (!coreset_out.empty()) {
        PipelineOutput out = run_pipeline(cfg, db);
        auto file = open_out(coreset_out);
        write_coreset_csv(file, out.coreset, out.features);
        std::printf("coreset: %zu points, weight %llu\n", out.coreset.size(),
                    static_cast<unsigned long long>(out.coreset.total_weight));
      }
      if (!matrix_out.empty()) {
        JoinTree tree = build_tree(cfg, db);
        auto features = resolve_features(cfg.query, db.relations);
        DataMatrix matrix = materialize_join(tree, features, cfg.materialization_cap);
        auto file = open_out(matrix_out);
        write_matrix_csv(file, matrix, *db.dict);
        std::printf("matrix: %zu distinct rows, weight %llu\n", matrix.size(),
                    static_cast<unsigned long long>(matrix.total_weight()));
      }
    } else if (*validate) {
      RunConfig cfg = load_config(config_path);
      auto db = load_database(cfg);
      JoinTree tree = build_tree(cfg, db);
      auto features = resolve_features(cfg.query, db.relations);
      std::printf("join tree (root %s)\n", tree.relation(tree.root()).name().c_str());
      for (std::size_t i = 0; i < tree.size(); ++i) {
        const auto& n = tree.node(i);
        std::printf("  %s", tree.relation(i).name().c_str());
        if (n.parent != kNoParent) {
          std::printf(" -> %s on [", tree.relation(n.parent).name().c_str());
          for (std::size_t a = 0; a < n.shared.size(); ++a) {
            std::printf("%s%s", a ? "," : "", n.shared[a].c_str());
          }
          std::printf("]");
        }
        std::printf("\n");
      }
      std::printf("join cardinality %llu\n",
                  static_cast<unsigned long long>(compute_join_count(tree)));
      auto fd = validate_fds(cfg.query.fd_chains, db.relations, *db.dict);
      for (const auto& v : fd.violations) std::printf("FD violation: %s\n", v.message.c_str());
      if (!marginals_out.empty()) {
        auto file = open_out(marginals_out);
        write_marginals_csv(file, compute_marginals(tree, features, *db.dict));
      }
      if (!fd.valid()) return 1;
      std::printf("ok\n");
    } else if (*synth) {
      SynthResult r = generate_synthetic(params, synth_dir);
      std::printf("wrote %s\n", r.config.string().c_str());
      std::printf("relation rows %zu, join cardinality %llu\n", r.total_relation_rows,
                  static_cast<unsigned long long>(r.join_cardinality));
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return exit_code(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
