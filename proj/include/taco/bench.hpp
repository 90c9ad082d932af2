#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "taco/dataio.hpp"
#include "taco/engine.hpp"

namespace taco::bench {

/// |ids(result[..k]) ∩ ids(truth[..k])| / k.
double recall(std::span<const dataio::Neighbor> result, std::span<const dataio::Neighbor> truth,
              std::size_t k);

struct MreValue {
  double value = 0.0;
  std::size_t skipped = 0;  // ranks dropped because the true distance is zero
};

/// Mean relative distance error over ranks, both lists sorted ascending.
MreValue mre(std::span<const dataio::Neighbor> result, std::span<const dataio::Neighbor> truth,
             std::size_t k);

struct QueryRecord {
  std::size_t query = 0;
  double recall = 0.0;
  double mre = 0.0;
  std::size_t candidate_num = 0;
  int last_collision = 0;
};

struct Metrics {
  double alpha = 0.0;
  double beta = 0.0;
  std::size_t k = 0;
  double recall = 0.0;
  double mre = 0.0;
  std::size_t mre_skipped = 0;
  double qps = 0.0;
  double mean_candidates = 0.0;
  double candidate_budget_ratio = 0.0;  // mean |C| / (beta * n)
  double build_seconds = 0.0;
  std::size_t index_bytes = 0;
  std::size_t threads = 1;
  std::vector<QueryRecord> per_query;
};

struct BenchmarkConfig {
  std::vector<double> alphas{0.05};
  std::vector<double> betas{0.005};
  std::size_t k = 50;
  std::size_t threads = 1;
  std::size_t timed_passes = 3;
};

/// One Metrics row per (alpha, beta): a warm-up pass, then `timed_passes`
/// timed passes with the median QPS reported.
std::vector<Metrics> run_benchmark(const engine::TacoIndex& index, const DatasetMatrix& data,
                                   const DatasetMatrix& queries, const dataio::GroundTruth& truth,
                                   const BenchmarkConfig& config);

void write_metrics_csv(std::ostream& out, const std::vector<Metrics>& rows);
void write_query_records_csv(std::ostream& out, const std::vector<Metrics>& rows);

struct ActivationTiming {
  std::size_t num_cells = 0;
  double alpha = 0.0;
  double heap_median_us = 0.0;    // median over repeats of mean per-query time
  double linear_median_us = 0.0;
  double mean_pops = 0.0;         // cells popped per query per subspace
  bool identical = true;
};

/// Times both traversals on one index. Throws kState if any query yields a
/// different cell sequence between the two.
std::vector<ActivationTiming> compare_activations(const engine::TacoIndex& index,
                                                  const DatasetMatrix& queries,
                                                  std::span<const double> alphas,
                                                  std::size_t repeats = 3);

/// Builds one index per K in `cell_grid` (other parameters from `base`) and
/// times both traversals on each.
std::vector<ActivationTiming> compare_activations(const DatasetMatrix& data,
                                                  const DatasetMatrix& queries,
                                                  const engine::IndexParams& base,
                                                  std::span<const std::size_t> cell_grid,
                                                  std::span<const double> alphas,
                                                  std::size_t repeats = 3,
                                                  std::size_t threads = 0);

void write_activation_csv(std::ostream& out, const std::vector<ActivationTiming>& rows);

enum class ScoreSource { kIndex, kExact };

struct ParetoQuery {
  std::size_t query = 0;
  double near_mean = 0.0;    // mean score of the nearest fraction of points
  double rest_mean = 0.0;
  double global_mean = 0.0;
  double topk_mean = 0.0;    // mean score of the true k nearest
  double p_neighbor = 0.0;   // collision frequency of the true k nearest
  double p_other = 0.0;      // collision frequency of sampled non-neighbors
  double delta = 0.0;        // p_neighbor - p_other
  std::vector<std::size_t> near_histogram;
  std::vector<std::size_t> rest_histogram;
};

struct ParetoReport {
  std::size_t num_subspaces = 0;
  double alpha = 0.0;
  double near_fraction = 0.2;
  std::size_t k = 50;
  std::vector<ParetoQuery> queries;

  double mean_near() const;
  double mean_global() const;
  double mean_topk() const;
  /// mean_near() / mean_global().
  double near_ratio() const;
  double topk_ratio() const;
  double positive_delta_fraction() const;
};

struct ParetoConfig {
  double alpha = 0.05;
  double near_fraction = 0.2;
  std::size_t k = 50;
  std::size_t non_neighbor_samples = 1000;
  ScoreSource source = ScoreSource::kExact;
  std::uint64_t seed = 0;
  std::size_t threads = 0;
};

/// SC-score distribution of each query split into its true nearest fraction
/// versus the rest, plus the empirical discriminability gap.
ParetoReport pareto_report(const engine::TacoIndex& index, const DatasetMatrix& data,
                           const DatasetMatrix& queries, const ParetoConfig& config);

void write_pareto_summary_csv(std::ostream& out, const ParetoReport& report);
/// Rows `query,group,h0..h{N_s}` with group in {near, rest}.
void write_pareto_histogram_csv(std::ostream& out, const ParetoReport& report);

/// "%.6g" formatting used by every CSV writer.
std::string format_number(double value);

}  // namespace taco::bench
