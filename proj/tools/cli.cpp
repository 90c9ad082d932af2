#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "taco/bench.hpp"
#include "taco/dataio.hpp"
#include "taco/engine.hpp"
#include "taco/parallel.hpp"
#include "taco/seed.hpp"
#include "taco/spectral.hpp"

namespace taco::cli {
namespace {

struct Preset {
  std::size_t num_subspaces;
  std::size_t subspace_dim;
};

const std::map<std::string, Preset>& presets() {
  static const std::map<std::string, Preset> table{
      {"deep1m", {6, 8}},   {"gist1m", {4, 10}},    {"sift10m", {6, 6}},
      {"ydeep10m", {6, 8}}, {"spacev10m", {6, 10}},
  };
  return table;
}

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IndexFlags {
  std::string preset;
  std::optional<std::size_t> num_subspaces;
  std::optional<std::size_t> subspace_dim;
  std::size_t num_cells = 4096;
  std::size_t iterations = 20;

  void add(CLI::App* cmd) {
    cmd->add_option("--preset", preset, "Parameter preset (N_s, s)")
        ->check(CLI::IsMember({"deep1m", "gist1m", "sift10m", "ydeep10m", "spacev10m"}));
    cmd->add_option("--ns", num_subspaces, "Number of subspaces N_s (overrides preset)");
    cmd->add_option("--s", subspace_dim, "Subspace dimensionality s (overrides preset)");
    cmd->add_option("--cells", num_cells, "Clusters per subspace K (perfect square)")
        ->capture_default_str();
    cmd->add_option("--iters", iterations, "K-means iterations t")->capture_default_str();
  }

  engine::IndexParams resolve(std::uint64_t seed) const {
    engine::IndexParams p;
    if (!preset.empty()) {
      const Preset& pre = presets().at(preset);
      p.num_subspaces = pre.num_subspaces;
      p.subspace_dim = pre.subspace_dim;
    } else if (!num_subspaces || !subspace_dim) {
      throw UsageError("either --preset or both --ns and --s are required");
    }
    if (num_subspaces) p.num_subspaces = *num_subspaces;
    if (subspace_dim) p.subspace_dim = *subspace_dim;
    p.num_cells = num_cells;
    p.kmeans_iterations = iterations;
    p.seed = seed;
    return p;
  }
};

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::kIo, "cannot open '" + path + "' for writing");
  return out;
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kIo:
    case ErrorKind::kFormat:
    case ErrorKind::kCorruption:
    case ErrorKind::kUnsupportedVersion:
    case ErrorKind::kEmptyInput:
      return kExitIo;
    default:
      return kExitDomain;
  }
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c == '\n' ? ' ' : c;
  }
  return out + "\"";
}

void check_query_params(const engine::QueryParams& qp) { qp.validate(); }

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Subspace-collision approximate nearest neighbor search"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  std::uint64_t seed = 0;
  std::size_t threads = 0;
  app.add_option("--seed", seed, "Seed for every randomized step")->capture_default_str();
  app.add_option("--threads", threads, "Worker threads (0: $TACO_THREADS or all cores)");

  // sample
  auto* sample = app.add_subcommand("sample", "Draw a seeded random subset of a vector file");
  std::string sample_in, sample_out, sample_ids;
  std::size_t sample_m = 0;
  sample->add_option("--data", sample_in, "Input .fvecs")->required();
  sample->add_option("--m", sample_m, "Rows to draw")->required();
  sample->add_option("--output", sample_out, "Output .fvecs")->required();
  sample->add_option("--ids-output", sample_ids, "Optional .ivecs of original row ids");

  // transform
  auto* transform = app.add_subcommand("transform", "Write the subspace-oriented transform of a dataset");
  std::string tr_data, tr_out, tr_apply;
  IndexFlags tr_flags;
  transform->add_option("--data", tr_data, "Dataset .fvecs used to fit the transform")->required();
  transform->add_option("--output", tr_out, "Output .fvecs of transformed vectors")->required();
  transform->add_option("--apply", tr_apply, "Transform this file instead of --data");
  tr_flags.add(transform);

  // build
  auto* build = app.add_subcommand("build", "Build and save an index");
  std::string b_data, b_index;
  IndexFlags b_flags;
  build->add_option("--data", b_data, "Dataset .fvecs")->required();
  build->add_option("--index", b_index, "Output index path")->required();
  b_flags.add(build);

  // groundtruth
  auto* gt = app.add_subcommand("groundtruth", "Exact k-NN by brute force");
  std::string gt_data, gt_queries, gt_out;
  std::size_t gt_k = 100;
  gt->add_option("--data", gt_data, "Dataset .fvecs")->required();
  gt->add_option("--queries", gt_queries, "Queries .fvecs")->required();
  gt->add_option("--output", gt_out, "Output prefix (<prefix>.ivecs, <prefix>.fvecs)")->required();
  gt->add_option("--k", gt_k, "Neighbors per query")->capture_default_str();

  // query
  auto* query = app.add_subcommand("query", "Answer k-ANN queries against a saved index");
  std::string q_index, q_data, q_queries, q_out, q_candidates;
  engine::QueryParams q_params;
  bool q_linear = false;
  query->add_option("--index", q_index, "Index path")->required();
  query->add_option("--data", q_data, "Dataset .fvecs the index was built from")->required();
  query->add_option("--queries", q_queries, "Queries .fvecs")->required();
  query->add_option("--output", q_out, "Output prefix (<prefix>.ivecs, <prefix>.fvecs)")->required();
  query->add_option("--alpha", q_params.alpha, "Collision ratio")->capture_default_str();
  query->add_option("--beta", q_params.beta, "Re-rank ratio")->capture_default_str();
  query->add_option("--k", q_params.k, "Results per query")->capture_default_str();
  query->add_option("--candidates-csv", q_candidates, "Dump per-query candidate counts");
  query->add_flag("--sc-linear", q_linear, "Use exact collision counting instead of the index");

  // bench
  auto* bench_cmd = app.add_subcommand("bench", "Recall/MRE/QPS over an (alpha, beta) grid");
  std::string bn_index, bn_data, bn_queries, bn_truth, bn_csv, bn_per_query;
  bench::BenchmarkConfig bn_config;
  bench_cmd->add_option("--index", bn_index, "Index path")->required();
  bench_cmd->add_option("--data", bn_data, "Dataset .fvecs")->required();
  bench_cmd->add_option("--queries", bn_queries, "Queries .fvecs")->required();
  bench_cmd->add_option("--truth", bn_truth, "Ground-truth prefix")->required();
  bench_cmd->add_option("--alphas", bn_config.alphas, "Collision ratios")->delimiter(',');
  bench_cmd->add_option("--betas", bn_config.betas, "Re-rank ratios")->delimiter(',');
  bench_cmd->add_option("--k", bn_config.k, "Results per query")->capture_default_str();
  bench_cmd->add_option("--passes", bn_config.timed_passes, "Timed passes")->capture_default_str();
  bench_cmd->add_option("--csv", bn_csv, "Metrics CSV (default: stdout)");
  bench_cmd->add_option("--per-query-csv", bn_per_query, "Per-query records CSV");

  // pareto
  auto* pareto = app.add_subcommand("pareto", "SC-score distribution of near versus far points");
  std::string pa_index, pa_data, pa_queries, pa_summary, pa_hist, pa_source = "exact";
  bench::ParetoConfig pa_config;
  pareto->add_option("--index", pa_index, "Index path")->required();
  pareto->add_option("--data", pa_data, "Dataset .fvecs")->required();
  pareto->add_option("--queries", pa_queries, "Queries .fvecs")->required();
  pareto->add_option("--alpha", pa_config.alpha, "Collision ratio")->capture_default_str();
  pareto->add_option("--near-fraction", pa_config.near_fraction, "Nearest fraction treated as near")
      ->capture_default_str();
  pareto->add_option("--k", pa_config.k, "True neighbors for the discriminability gap")
      ->capture_default_str();
  pareto->add_option("--source", pa_source, "Score source")
      ->check(CLI::IsMember({"exact", "index"}))
      ->capture_default_str();
  pareto->add_option("--summary-csv", pa_summary, "Per-query summary CSV");
  pareto->add_option("--histogram-csv", pa_hist, "Histogram CSV (default: stdout)");

  // compare-activations
  auto* cmp = app.add_subcommand("compare-activations", "Time heap versus linear cell activation");
  std::string ca_data, ca_queries, ca_csv;
  IndexFlags ca_flags;
  std::vector<std::size_t> ca_cells{1024, 4096, 16384, 65536};
  std::vector<double> ca_alphas{0.01, 0.05, 0.1};
  std::size_t ca_repeats = 3;
  cmp->add_option("--data", ca_data, "Dataset .fvecs")->required();
  cmp->add_option("--queries", ca_queries, "Queries .fvecs")->required();
  cmp->add_option("--cells-grid", ca_cells, "K values")->delimiter(',');
  cmp->add_option("--alphas", ca_alphas, "Collision ratios")->delimiter(',');
  cmp->add_option("--repeats", ca_repeats, "Timing repeats")->capture_default_str();
  cmp->add_option("--csv", ca_csv, "Timing CSV (default: stdout)");
  ca_flags.add(cmp);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  using nlohmann::json;
  try {
    if (*sample) {
      const auto data = dataio::read_vectors(sample_in);
      const auto subset = dataio::sample_subset(data, sample_m, derive_seed(seed, 0));
      dataio::write_vectors(subset.rows, sample_out);
      if (!sample_ids.empty()) {
        IdMatrix ids(subset.original_ids.size(), 1);
        for (std::size_t i = 0; i < subset.original_ids.size(); ++i) {
          ids(i, 0) = static_cast<std::int32_t>(subset.original_ids[i]);
        }
        dataio::write_ids(ids, sample_ids);
      }
      out << json{{"command", "sample"}, {"rows", subset.rows.rows()}}.dump() << '\n';
    } else if (*transform) {
      const auto params = tr_flags.resolve(seed);
      const auto data = dataio::read_vectors(tr_data);
      spectral::FitReport report;
      const auto model = spectral::fit_transform_model(data, params.num_subspaces,
                                                       params.subspace_dim, &report, threads);
      const auto target = tr_apply.empty() ? data : dataio::read_vectors(tr_apply);
      dataio::write_vectors(spectral::transform_points(model, target, threads), tr_out);
      out << json{{"command", "transform"},
                  {"input_dim", model.dim()},
                  {"output_dim", model.output_dim()},
                  {"warnings", report.warnings}}
                 .dump()
          << '\n';
    } else if (*build) {
      const auto params = b_flags.resolve(seed);
      const auto data = dataio::read_vectors(b_data);
      params.validate(data.cols(), data.rows());
      const auto index = engine::build_index(data, params, {false, threads});
      engine::save_index(index, b_index);
      const auto& meta = index.metadata();
      out << json{{"command", "build"},
                  {"n", index.num_points()},
                  {"d", index.dim()},
                  {"num_subspaces", params.num_subspaces},
                  {"subspace_dim", params.subspace_dim},
                  {"num_cells", params.num_cells},
                  {"kmeans_iterations", params.kmeans_iterations},
                  {"seed", params.seed},
                  {"transformed_dim", params.num_subspaces * params.subspace_dim},
                  {"reduction_percent", meta.reduction_percent},
                  {"transform_seconds", meta.transform_seconds},
                  {"index_seconds", meta.index_seconds},
                  {"index_bytes", engine::serialize_index(index).size()},
                  {"warnings", meta.warnings}}
                 .dump()
          << '\n';
    } else if (*gt) {
      const auto data = dataio::read_vectors(gt_data);
      const auto queries = dataio::read_vectors(gt_queries);
      const auto truth = dataio::compute_ground_truth(data, queries, gt_k, threads);
      dataio::save_ground_truth(truth, gt_out + ".ivecs", gt_out + ".fvecs");
      out << json{{"command", "groundtruth"}, {"queries", truth.queries()}, {"k", truth.k()}}.dump()
          << '\n';
    } else if (*query) {
      check_query_params(q_params);
      auto index = engine::load_index(q_index);
      const auto data = dataio::read_vectors(q_data);
      const auto queries = dataio::read_vectors(q_queries);
      if (q_linear) index.retain_transformed(data, threads);
      std::vector<engine::SearchResult> results(queries.rows());
      std::vector<engine::QueryStats> stats(queries.rows());
      engine::QueryScratch scratch;
      const auto start = std::chrono::steady_clock::now();
      for (std::size_t q = 0; q < queries.rows(); ++q) {
        results[q] = q_linear ? engine::sc_linear_query(index, data, queries.row(q), q_params,
                                                        &stats[q], &scratch)
                              : engine::knn_query(index, data, queries.row(q), q_params,
                                                  &stats[q], &scratch);
      }
      const double secs =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      engine::save_results(results, q_params.k, q_out + ".ivecs", q_out + ".fvecs");
      if (!q_candidates.empty()) {
        auto csv = open_output(q_candidates);
        csv << "query,candidate_num,last_collision\n";
        for (std::size_t q = 0; q < stats.size(); ++q) {
          csv << q << ',' << stats[q].candidate_num << ',' << stats[q].last_collision << '\n';
        }
      }
      out << json{{"command", "query"},
                  {"queries", queries.rows()},
                  {"k", q_params.k},
                  {"alpha", q_params.alpha},
                  {"beta", q_params.beta},
                  {"mode", q_linear ? "sc-linear" : "index"},
                  {"seconds", secs}}
                 .dump()
          << '\n';
    } else if (*bench_cmd) {
      for (double a : bn_config.alphas) check_query_params({a, 0.5, bn_config.k});
      for (double b : bn_config.betas) check_query_params({0.5, b, bn_config.k});
      bn_config.threads = threads == 0 ? default_thread_count() : threads;
      const auto index = engine::load_index(bn_index);
      const auto data = dataio::read_vectors(bn_data);
      const auto queries = dataio::read_vectors(bn_queries);
      const auto truth = dataio::load_ground_truth(bn_truth + ".ivecs", bn_truth + ".fvecs");
      const auto rows = bench::run_benchmark(index, data, queries, truth, bn_config);
      if (bn_csv.empty()) {
        bench::write_metrics_csv(out, rows);
      } else {
        auto csv = open_output(bn_csv);
        bench::write_metrics_csv(csv, rows);
      }
      if (!bn_per_query.empty()) {
        auto csv = open_output(bn_per_query);
        bench::write_query_records_csv(csv, rows);
      }
    } else if (*pareto) {
      check_query_params({pa_config.alpha, 0.5, 1});
      pa_config.source = pa_source == "index" ? bench::ScoreSource::kIndex : bench::ScoreSource::kExact;
      pa_config.seed = seed;
      pa_config.threads = threads;
      auto index = engine::load_index(pa_index);
      const auto data = dataio::read_vectors(pa_data);
      const auto queries = dataio::read_vectors(pa_queries);
      if (pa_config.source == bench::ScoreSource::kExact) index.retain_transformed(data, threads);
      const auto report = bench::pareto_report(index, data, queries, pa_config);
      if (!pa_summary.empty()) {
        auto csv = open_output(pa_summary);
        bench::write_pareto_summary_csv(csv, report);
      }
      if (pa_hist.empty()) {
        bench::write_pareto_histogram_csv(out, report);
      } else {
        auto csv = open_output(pa_hist);
        bench::write_pareto_histogram_csv(csv, report);
        out << json{{"command", "pareto"},
                    {"near_ratio", report.near_ratio()},
                    {"topk_ratio", report.topk_ratio()},
                    {"positive_delta_fraction", report.positive_delta_fraction()}}
                   .dump()
            << '\n';
      }
    } else if (*cmp) {
      for (double a : ca_alphas) check_query_params({a, 0.5, 1});
      const auto params = ca_flags.resolve(seed);
      const auto data = dataio::read_vectors(ca_data);
      const auto queries = dataio::read_vectors(ca_queries);
      const auto rows =
          bench::compare_activations(data, queries, params, ca_cells, ca_alphas, ca_repeats, threads);
      if (ca_csv.empty()) {
        bench::write_activation_csv(out, rows);
      } else {
        auto csv = open_output(ca_csv);
        bench::write_activation_csv(csv, rows);
      }
    }
  } catch (const UsageError& e) {
    err << "error kind=usage message=" << quote(e.what()) << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    err << "error kind=" << to_string(e.kind()) << " message=" << quote(e.what()) << '\n';
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    err << "error kind=internal message=" << quote(e.what()) << '\n';
    return kExitDomain;
  }
  return kExitOk;
}

}  // namespace taco::cli
