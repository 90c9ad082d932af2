#include "taco/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <random>
#include <unordered_set>

#include "taco/parallel.hpp"
#include "taco/seed.hpp"

namespace taco::bench {
namespace {

using Clock = std::chrono::steady_clock;

constexpr double kZeroDistance = 1e-12;

double median(std::vector<double> values) {
  std::ranges::sort(values);
  const std::size_t mid = values.size() / 2;
  return values.size() % 2 == 1 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
}

}  // namespace

std::string format_number(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", value);
  return buf;
}

double recall(std::span<const dataio::Neighbor> result, std::span<const dataio::Neighbor> truth,
              std::size_t k) {
  if (k == 0 || k > truth.size()) {
    throw Error(ErrorKind::kBounds, "recall@" + std::to_string(k) + " needs " + std::to_string(k) +
                                        " truth entries, have " + std::to_string(truth.size()));
  }
  std::unordered_set<std::uint32_t> expected;
  for (std::size_t r = 0; r < k; ++r) expected.insert(truth[r].id);
  std::size_t hits = 0;
  for (std::size_t r = 0; r < std::min(k, result.size()); ++r) hits += expected.count(result[r].id);
  return static_cast<double>(hits) / static_cast<double>(k);
}

MreValue mre(std::span<const dataio::Neighbor> result, std::span<const dataio::Neighbor> truth,
             std::size_t k) {
  if (k == 0 || result.size() < k || truth.size() < k) {
    throw Error(ErrorKind::kBounds, "MRE@" + std::to_string(k) + " with " +
                                        std::to_string(result.size()) + " results and " +
                                        std::to_string(truth.size()) + " truth entries");
  }
  std::vector<double> approx(k);
  std::vector<double> exact(k);
  for (std::size_t r = 0; r < k; ++r) {
    approx[r] = result[r].distance;
    exact[r] = truth[r].distance;
  }
  std::ranges::sort(approx);
  std::ranges::sort(exact);
  MreValue out;
  double sum = 0.0;
  std::size_t counted = 0;
  for (std::size_t r = 0; r < k; ++r) {
    if (exact[r] < kZeroDistance) {
      if (approx[r] < kZeroDistance) {
        ++counted;
      } else {
        ++out.skipped;
      }
      continue;
    }
    sum += (approx[r] - exact[r]) / exact[r];
    ++counted;
  }
  out.value = counted == 0 ? 0.0 : sum / static_cast<double>(counted);
  return out;
}

std::vector<Metrics> run_benchmark(const engine::TacoIndex& index, const DatasetMatrix& data,
                                   const DatasetMatrix& queries, const dataio::GroundTruth& truth,
                                   const BenchmarkConfig& config) {
  if (truth.queries() != queries.rows()) {
    throw Error(ErrorKind::kDimensionMismatch, "ground truth covers " +
                                                   std::to_string(truth.queries()) +
                                                   " queries, batch has " +
                                                   std::to_string(queries.rows()));
  }
  if (truth.k() < config.k) {
    throw Error(ErrorKind::kBounds, "ground truth holds " + std::to_string(truth.k()) +
                                        " neighbors per query, k = " + std::to_string(config.k));
  }
  if (queries.rows() == 0) throw Error(ErrorKind::kEmptyInput, "empty query batch");
  const std::size_t index_bytes = engine::serialize_index(index).size();
  const double build_seconds = index.metadata().transform_seconds + index.metadata().index_seconds;
  const std::size_t threads = config.threads == 0 ? default_thread_count() : config.threads;

  std::vector<Metrics> rows;
  for (double alpha : config.alphas) {
    for (double beta : config.betas) {
      engine::QueryParams qp{alpha, beta, config.k};
      std::vector<engine::QueryStats> stats;
      auto results = engine::knn_query_batch(index, data, queries, qp, threads, &stats);
      std::vector<double> qps;
      for (std::size_t pass = 0; pass < std::max<std::size_t>(1, config.timed_passes); ++pass) {
        const auto start = Clock::now();
        auto timed = engine::knn_query_batch(index, data, queries, qp, threads);
        const double secs = std::chrono::duration<double>(Clock::now() - start).count();
        qps.push_back(static_cast<double>(queries.rows()) / std::max(secs, 1e-12));
      }

      Metrics m;
      m.alpha = alpha;
      m.beta = beta;
      m.k = config.k;
      m.qps = median(qps);
      m.build_seconds = build_seconds;
      m.index_bytes = index_bytes;
      m.threads = threads;
      double cand = 0.0;
      for (std::size_t q = 0; q < queries.rows(); ++q) {
        QueryRecord rec;
        rec.query = q;
        rec.recall = recall(results[q], truth.row(q), config.k);
        rec.candidate_num = stats[q].candidate_num;
        rec.last_collision = stats[q].last_collision;
        if (results[q].size() >= config.k) {
          const auto e = mre(results[q], truth.row(q), config.k);
          rec.mre = e.value;
          m.mre_skipped += e.skipped;
        }
        m.recall += rec.recall;
        m.mre += rec.mre;
        cand += static_cast<double>(rec.candidate_num);
        m.per_query.push_back(rec);
      }
      const auto nq = static_cast<double>(queries.rows());
      m.recall /= nq;
      m.mre /= nq;
      m.mean_candidates = cand / nq;
      m.candidate_budget_ratio =
          m.mean_candidates / (beta * static_cast<double>(index.num_points()));
      rows.push_back(std::move(m));
    }
  }
  return rows;
}

void write_metrics_csv(std::ostream& out, const std::vector<Metrics>& rows) {
  out << "alpha,beta,k,recall,mre,mre_skipped,qps,mean_candidates,candidate_budget_ratio,"
         "build_seconds,index_bytes,threads\n";
  for (const auto& m : rows) {
    out << format_number(m.alpha) << ',' << format_number(m.beta) << ',' << m.k << ','
        << format_number(m.recall) << ',' << format_number(m.mre) << ',' << m.mre_skipped << ','
        << format_number(m.qps) << ',' << format_number(m.mean_candidates) << ','
        << format_number(m.candidate_budget_ratio) << ',' << format_number(m.build_seconds) << ','
        << m.index_bytes << ',' << m.threads << '\n';
  }
}

void write_query_records_csv(std::ostream& out, const std::vector<Metrics>& rows) {
  out << "alpha,beta,query,recall,mre,candidate_num,last_collision\n";
  for (const auto& m : rows) {
    for (const auto& r : m.per_query) {
      out << format_number(m.alpha) << ',' << format_number(m.beta) << ',' << r.query << ','
          << format_number(r.recall) << ',' << format_number(r.mre) << ',' << r.candidate_num
          << ',' << r.last_collision << '\n';
    }
  }
}

std::vector<ActivationTiming> compare_activations(const engine::TacoIndex& index,
                                                  const DatasetMatrix& queries,
                                                  std::span<const double> alphas,
                                                  std::size_t repeats) {
  const std::size_t n = index.num_points();
  const std::size_t s = index.params().subspace_dim;
  const auto& subs = index.subspaces();

  // Centroid orders are shared input to both traversals and stay untimed.
  std::vector<imi::CentroidOrder> orders;
  orders.reserve(queries.rows() * subs.size());
  std::vector<float> transformed(index.transform().output_dim());
  for (std::size_t q = 0; q < queries.rows(); ++q) {
    index.transform().apply(queries.row(q), transformed);
    for (std::size_t j = 0; j < subs.size(); ++j) {
      orders.push_back(imi::sorted_centroid_distances(
          subs[j], std::span<const float>(transformed).subspan(j * s, s)));
    }
  }

  std::vector<ActivationTiming> rows;
  for (double alpha : alphas) {
    const std::size_t threshold = imi::collision_threshold(alpha, n);
    ActivationTiming row;
    row.num_cells = index.params().num_cells;
    row.alpha = alpha;

    std::size_t pops = 0;
    for (std::size_t q = 0; q < queries.rows(); ++q) {
      for (std::size_t j = 0; j < subs.size(); ++j) {
        const auto& order = orders[q * subs.size() + j];
        const auto heap = imi::scalable_dynamic_activation(alpha, n, order, subs[j]);
        const auto linear = imi::linear_dynamic_activation(alpha, n, order, subs[j]);
        if (heap.pop_trace != linear.pop_trace || heap.retrieved_num != linear.retrieved_num) {
          row.identical = false;
        }
        pops += heap.pop_trace.size();
      }
    }
    if (!row.identical) {
      throw Error(ErrorKind::kState, "activation traversals diverged at K = " +
                                         std::to_string(row.num_cells));
    }
    row.mean_pops = static_cast<double>(pops) / static_cast<double>(orders.size());

    auto time_pass = [&](auto&& traversal) {
      std::size_t sink = 0;
      const auto start = Clock::now();
      for (std::size_t q = 0; q < queries.rows(); ++q) {
        for (std::size_t j = 0; j < subs.size(); ++j) {
          sink += traversal(threshold, orders[q * subs.size() + j], subs[j],
                            [&sink](const imi::PopRecord&, std::span<const std::uint32_t> ids) {
                              sink += ids.size();
                            });
        }
      }
      const double us = std::chrono::duration<double, std::micro>(Clock::now() - start).count();
      volatile std::size_t keep = sink;
      (void)keep;
      return us / static_cast<double>(queries.rows());
    };
    std::vector<double> heap_times;
    std::vector<double> linear_times;
    for (std::size_t r = 0; r < std::max<std::size_t>(1, repeats); ++r) {
      heap_times.push_back(time_pass([](auto&&... a) {
        return imi::detail::heap_activation(std::forward<decltype(a)>(a)...);
      }));
      linear_times.push_back(time_pass([](auto&&... a) {
        return imi::detail::linear_activation(std::forward<decltype(a)>(a)...);
      }));
    }
    row.heap_median_us = median(heap_times);
    row.linear_median_us = median(linear_times);
    rows.push_back(row);
  }
  return rows;
}

std::vector<ActivationTiming> compare_activations(const DatasetMatrix& data,
                                                  const DatasetMatrix& queries,
                                                  const engine::IndexParams& base,
                                                  std::span<const std::size_t> cell_grid,
                                                  std::span<const double> alphas,
                                                  std::size_t repeats, std::size_t threads) {
  std::vector<ActivationTiming> rows;
  for (std::size_t cells : cell_grid) {
    engine::IndexParams params = base;
    params.num_cells = cells;
    const auto index = engine::build_index(data, params, {false, threads});
    auto part = compare_activations(index, queries, alphas, repeats);
    rows.insert(rows.end(), part.begin(), part.end());
  }
  return rows;
}

void write_activation_csv(std::ostream& out, const std::vector<ActivationTiming>& rows) {
  out << "K,alpha,heap_us,linear_us,heap_over_linear,mean_pops,identical\n";
  for (const auto& r : rows) {
    out << r.num_cells << ',' << format_number(r.alpha) << ',' << format_number(r.heap_median_us)
        << ',' << format_number(r.linear_median_us) << ','
        << format_number(r.heap_median_us / std::max(r.linear_median_us, 1e-12)) << ','
        << format_number(r.mean_pops) << ',' << (r.identical ? 1 : 0) << '\n';
  }
}

double ParetoReport::mean_near() const {
  double s = 0.0;
  for (const auto& q : queries) s += q.near_mean;
  return queries.empty() ? 0.0 : s / static_cast<double>(queries.size());
}

double ParetoReport::mean_global() const {
  double s = 0.0;
  for (const auto& q : queries) s += q.global_mean;
  return queries.empty() ? 0.0 : s / static_cast<double>(queries.size());
}

double ParetoReport::mean_topk() const {
  double s = 0.0;
  for (const auto& q : queries) s += q.topk_mean;
  return queries.empty() ? 0.0 : s / static_cast<double>(queries.size());
}

double ParetoReport::near_ratio() const {
  const double g = mean_global();
  return g > 0.0 ? mean_near() / g : 0.0;
}

double ParetoReport::topk_ratio() const {
  const double g = mean_global();
  return g > 0.0 ? mean_topk() / g : 0.0;
}

double ParetoReport::positive_delta_fraction() const {
  if (queries.empty()) return 0.0;
  std::size_t positive = 0;
  for (const auto& q : queries) positive += q.delta > 0.0 ? 1 : 0;
  return static_cast<double>(positive) / static_cast<double>(queries.size());
}

ParetoReport pareto_report(const engine::TacoIndex& index, const DatasetMatrix& data,
                           const DatasetMatrix& queries, const ParetoConfig& config) {
  const std::size_t n = index.num_points();
  const std::size_t ns = index.params().num_subspaces;
  if (data.rows() != n) {
    throw Error(ErrorKind::kDimensionMismatch, "dataset does not match index");
  }
  if (!(config.near_fraction > 0.0 && config.near_fraction <= 1.0)) {
    throw Error(ErrorKind::kParameter, "near fraction outside (0, 1]");
  }
  if (config.k < 1 || config.k >= n) {
    throw Error(ErrorKind::kParameter, "k must be in [1, n)");
  }
  const auto near_count = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(config.near_fraction * static_cast<double>(n))));

  ParetoReport report;
  report.num_subspaces = ns;
  report.alpha = config.alpha;
  report.near_fraction = config.near_fraction;
  report.k = config.k;
  report.queries.resize(queries.rows());

  parallel_for(queries.rows(), config.threads, [&](std::size_t begin, std::size_t end) {
    engine::QueryScratch scratch;
    std::vector<std::pair<double, std::uint32_t>> ranked(n);
    for (std::size_t q = begin; q < end; ++q) {
      const auto query = queries.row(q);
      if (config.source == ScoreSource::kExact) {
        engine::exact_collisions(index, query, config.alpha, scratch);
      } else {
        engine::count_collisions(index, query, config.alpha, scratch);
      }
      const auto& scores = scratch.scores;
      for (std::uint32_t i = 0; i < n; ++i) ranked[i] = {dataio::l2_distance_sq(query, data.row(i)), i};
      std::ranges::sort(ranked);

      ParetoQuery& out = report.queries[q];
      out.query = q;
      out.near_histogram.assign(ns + 1, 0);
      out.rest_histogram.assign(ns + 1, 0);
      double near_sum = 0.0;
      double rest_sum = 0.0;
      double topk_sum = 0.0;
      for (std::size_t r = 0; r < n; ++r) {
        const auto score = scores[ranked[r].second];
        if (r < near_count) {
          ++out.near_histogram[score];
          near_sum += score;
        } else {
          ++out.rest_histogram[score];
          rest_sum += score;
        }
        if (r < config.k) topk_sum += score;
      }
      out.near_mean = near_sum / static_cast<double>(near_count);
      out.rest_mean = n > near_count ? rest_sum / static_cast<double>(n - near_count) : 0.0;
      out.global_mean = (near_sum + rest_sum) / static_cast<double>(n);
      out.topk_mean = topk_sum / static_cast<double>(config.k);

      std::mt19937_64 rng(derive_seed(config.seed, 0x1000 + q));
      std::uniform_int_distribution<std::size_t> pick(config.k, n - 1);
      double other_sum = 0.0;
      const std::size_t samples = std::max<std::size_t>(1, config.non_neighbor_samples);
      for (std::size_t t = 0; t < samples; ++t) other_sum += scores[ranked[pick(rng)].second];
      out.p_neighbor = topk_sum / static_cast<double>(config.k * ns);
      out.p_other = other_sum / static_cast<double>(samples * ns);
      out.delta = out.p_neighbor - out.p_other;
    }
  });
  return report;
}

void write_pareto_summary_csv(std::ostream& out, const ParetoReport& report) {
  out << "query,near_mean,rest_mean,global_mean,near_ratio,topk_mean,p_neighbor,p_other,delta\n";
  for (const auto& q : report.queries) {
    out << q.query << ',' << format_number(q.near_mean) << ',' << format_number(q.rest_mean) << ','
        << format_number(q.global_mean) << ','
        << format_number(q.global_mean > 0.0 ? q.near_mean / q.global_mean : 0.0) << ','
        << format_number(q.topk_mean) << ',' << format_number(q.p_neighbor) << ','
        << format_number(q.p_other) << ',' << format_number(q.delta) << '\n';
  }
}

void write_pareto_histogram_csv(std::ostream& out, const ParetoReport& report) {
  out << "query,group";
  for (std::size_t c = 0; c <= report.num_subspaces; ++c) out << ",h" << c;
  out << '\n';
  for (const auto& q : report.queries) {
    for (int g = 0; g < 2; ++g) {
      const auto& hist = g == 0 ? q.near_histogram : q.rest_histogram;
      out << q.query << ',' << (g == 0 ? "near" : "rest");
      for (auto count : hist) out << ',' << count;
      out << '\n';
    }
  }
}

}  // namespace taco::bench
