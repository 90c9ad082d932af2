#include "taco/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "taco/parallel.hpp"
#include "taco/seed.hpp"

namespace taco::engine {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

void require_query_dim(const TacoIndex& index, std::span<const float> query) {
  if (query.size() != index.dim()) {
    throw Error(ErrorKind::kDimensionMismatch, "query dimension " + std::to_string(query.size()) +
                                                   " vs index dimension " +
                                                   std::to_string(index.dim()));
  }
}

void prepare(const TacoIndex& index, std::span<const float> query, QueryScratch& scratch) {
  require_query_dim(index, query);
  scratch.transformed.resize(index.transform().output_dim());
  index.transform().apply(query, scratch.transformed);
  scratch.scores.assign(index.num_points(), 0);
}

}  // namespace

std::size_t IndexParams::clusters_per_codebook() const {
  return static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(num_cells))));
}

void IndexParams::validate(std::size_t dim, std::size_t n) const {
  if (num_subspaces < 1 || num_subspaces > 255) {
    throw Error(ErrorKind::kParameter,
                "num_subspaces = " + std::to_string(num_subspaces) + " outside [1, 255]");
  }
  if (subspace_dim < 2) {
    throw Error(ErrorKind::kParameter,
                "subspace_dim = " + std::to_string(subspace_dim) + " cannot be split in two");
  }
  if (num_subspaces * subspace_dim > dim) {
    throw Error(ErrorKind::kCapacity, "num_subspaces * subspace_dim = " +
                                          std::to_string(num_subspaces) + " * " +
                                          std::to_string(subspace_dim) + " = " +
                                          std::to_string(num_subspaces * subspace_dim) +
                                          " exceeds dimension " +
                                          std::to_string(dim));
  }
  const std::size_t root = clusters_per_codebook();
  if (num_cells == 0 || root * root != num_cells) {
    throw Error(ErrorKind::kParameter, "K = " + std::to_string(num_cells) + " is not a perfect square");
  }
  if (root > 65536) throw Error(ErrorKind::kParameter, "sqrt(K) must be <= 65536");
  if (kmeans_iterations < 1) throw Error(ErrorKind::kParameter, "k-means iterations must be >= 1");
  if (n < 2 || n < root) {
    throw Error(ErrorKind::kInsufficientData, "n = " + std::to_string(n) +
                                                  " points cannot train " + std::to_string(root) +
                                                  " clusters per codebook");
  }
  if (n > 0xffffffffULL) throw Error(ErrorKind::kParameter, "n exceeds 32-bit ids");
}

void QueryParams::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw Error(ErrorKind::kParameter, "alpha = " + std::to_string(alpha) + " outside (0, 1)");
  }
  if (!(beta > 0.0 && beta < 1.0)) {
    throw Error(ErrorKind::kParameter, "beta = " + std::to_string(beta) + " outside (0, 1)");
  }
  if (k < 1) throw Error(ErrorKind::kParameter, "k must be >= 1");
}

TacoIndex::TacoIndex(IndexParams params, std::size_t num_points,
                     spectral::TransformModel transform,
                     std::vector<imi::InvertedMultiIndex> subspaces)
    : params_(params),
      num_points_(num_points),
      transform_(std::move(transform)),
      subspaces_(std::move(subspaces)) {
  if (subspaces_.size() != params_.num_subspaces) {
    throw Error(ErrorKind::kState, "index holds " + std::to_string(subspaces_.size()) +
                                       " subspaces, expected " +
                                       std::to_string(params_.num_subspaces));
  }
  for (const auto& sub : subspaces_) {
    if (sub.num_points() != num_points_) {
      throw Error(ErrorKind::kState, "subspace index does not cover every point");
    }
  }
}

const DatasetMatrix& TacoIndex::transformed() const {
  if (!transformed_) {
    throw Error(ErrorKind::kState, "transformed corpus was not retained at build time");
  }
  return *transformed_;
}

void TacoIndex::retain_transformed(const DatasetMatrix& data, std::size_t threads) {
  if (data.rows() != num_points_) {
    throw Error(ErrorKind::kDimensionMismatch, "dataset has " + std::to_string(data.rows()) +
                                                   " rows, index has " +
                                                   std::to_string(num_points_));
  }
  transformed_ = spectral::transform_points(transform_, data, threads);
}

void TacoIndex::set_transformed(DatasetMatrix transformed) {
  if (transformed.rows() != num_points_ || transformed.cols() != transform_.output_dim()) {
    throw Error(ErrorKind::kDimensionMismatch, "transformed corpus shape does not match index");
  }
  transformed_ = std::move(transformed);
}

TacoIndex build_index(const DatasetMatrix& data, const IndexParams& params,
                      const BuildOptions& options) {
  params.validate(data.cols(), data.rows());
  const auto start = Clock::now();
  spectral::FitReport report;
  auto model = spectral::fit_transform_model(data, params.num_subspaces, params.subspace_dim,
                                             &report, options.threads);
  DatasetMatrix transformed = spectral::transform_points(model, data, options.threads);
  const double transform_seconds = seconds_since(start);

  const auto index_start = Clock::now();
  const std::size_t s = params.subspace_dim;
  std::vector<imi::InvertedMultiIndex> subspaces(params.num_subspaces);
  parallel_for(params.num_subspaces, options.threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t j = begin; j < end; ++j) {
      DatasetMatrix slice(transformed.rows(), s);
      for (std::size_t i = 0; i < transformed.rows(); ++i) {
        const auto row = transformed.row(i);
        std::copy(row.begin() + static_cast<std::ptrdiff_t>(j * s),
                  row.begin() + static_cast<std::ptrdiff_t>((j + 1) * s), slice.row(i).begin());
      }
      subspaces[j] = imi::build_subspace_index(slice, params.num_cells, params.kmeans_iterations,
                                               derive_seed(params.seed, 1 + j), 1);
    }
  });

  TacoIndex index(params, data.rows(), std::move(model), std::move(subspaces));
  auto& meta = index.metadata();
  meta.transform_seconds = transform_seconds;
  meta.index_seconds = seconds_since(index_start);
  meta.reduction_percent =
      100.0 * (1.0 - static_cast<double>(params.num_subspaces * s) / static_cast<double>(data.cols()));
  meta.warnings = std::move(report.warnings);
  if (options.retain_transformed) index.set_transformed(std::move(transformed));
  return index;
}

void count_collisions(const TacoIndex& index, std::span<const float> query, double alpha,
                      QueryScratch& scratch) {
  prepare(index, query, scratch);
  const std::size_t n = index.num_points();
  const std::size_t threshold = imi::collision_threshold(alpha, n);
  const std::size_t s = index.params().subspace_dim;
  auto* scores = scratch.scores.data();
  const std::span<const float> transformed(scratch.transformed);
  for (std::size_t j = 0; j < index.subspaces().size(); ++j) {
    const auto& sub = index.subspaces()[j];
    const auto order = imi::sorted_centroid_distances(sub, transformed.subspan(j * s, s));
    imi::detail::heap_activation(threshold, order, sub,
                                 [scores](const imi::PopRecord&, std::span<const std::uint32_t> ids) {
                                   for (auto id : ids) ++scores[id];
                                 });
  }
}

SCScoreTable count_collisions(const TacoIndex& index, std::span<const float> query, double alpha) {
  QueryScratch scratch;
  count_collisions(index, query, alpha, scratch);
  return std::move(scratch.scores);
}

void exact_collisions(const TacoIndex& index, std::span<const float> query, double alpha,
                      QueryScratch& scratch) {
  const DatasetMatrix& corpus = index.transformed();
  prepare(index, query, scratch);
  const std::size_t n = index.num_points();
  const std::size_t threshold = imi::collision_threshold(alpha, n);
  const std::size_t s = index.params().subspace_dim;
  std::vector<std::pair<float, std::uint32_t>> ranked(n);
  const std::span<const float> transformed(scratch.transformed);
  for (std::size_t j = 0; j < index.params().num_subspaces; ++j) {
    const auto q_sub = transformed.subspan(j * s, s);
    for (std::uint32_t i = 0; i < n; ++i) {
      ranked[i] = {clustering::squared_distance(q_sub, corpus.row(i).subspan(j * s, s)), i};
    }
    if (threshold < n) {
      std::nth_element(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(threshold),
                       ranked.end());
    }
    for (std::size_t r = 0; r < threshold; ++r) ++scratch.scores[ranked[r].second];
  }
}

SCScoreTable exact_collisions(const TacoIndex& index, std::span<const float> query, double alpha) {
  QueryScratch scratch;
  exact_collisions(index, query, alpha, scratch);
  return std::move(scratch.scores);
}

CandidateSet select_candidates(std::span<const std::uint8_t> scores, double beta,
                               std::size_t num_subspaces) {
  if (!(beta > 0.0 && beta < 1.0)) {
    throw Error(ErrorKind::kParameter, "beta = " + std::to_string(beta) + " outside (0, 1)");
  }
  const std::size_t n = scores.size();
  CandidateSet out;
  out.histogram.assign(num_subspaces + 1, 0);
  for (auto score : scores) {
    if (score > num_subspaces) {
      throw Error(ErrorKind::kBounds, "SC-score " + std::to_string(score) + " exceeds N_s = " +
                                          std::to_string(num_subspaces));
    }
    ++out.histogram[score];
  }
  const double budget = beta * static_cast<double>(n);
  long last = static_cast<long>(num_subspaces);
  std::size_t taken = 0;
  for (long j = static_cast<long>(num_subspaces); j >= 0; --j) {
    const std::size_t level = out.histogram[static_cast<std::size_t>(j)];
    taken += level;
    if (static_cast<double>(level) <= budget - static_cast<double>(taken)) {
      --last;
    } else {
      break;
    }
  }
  last = std::max(last, 0L);
  out.last_collision = static_cast<int>(last);
  out.candidate_num = taken;
  out.ids.reserve(taken);
  for (std::uint32_t i = 0; i < n; ++i) {
    if (scores[i] >= last) out.ids.push_back(i);
  }
  return out;
}

SearchResult rerank(const DatasetMatrix& data, std::span<const float> query,
                    std::span<const std::uint32_t> candidates, std::size_t k) {
  if (query.size() != data.cols()) {
    throw Error(ErrorKind::kDimensionMismatch, "query dimension " + std::to_string(query.size()) +
                                                   " vs data dimension " +
                                                   std::to_string(data.cols()));
  }
  SearchResult scored;
  scored.reserve(candidates.size());
  for (auto id : candidates) {
    if (id >= data.rows()) {
      throw Error(ErrorKind::kBounds, "candidate id " + std::to_string(id) + " out of range");
    }
    scored.push_back({id, static_cast<float>(dataio::l2_distance(query, data.row(id)))});
  }
  const std::size_t keep = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(keep),
                    scored.end(), dataio::neighbor_less);
  scored.resize(keep);
  return scored;
}

namespace {

template <typename Count>
SearchResult run_pipeline(const TacoIndex& index, const DatasetMatrix& data,
                          std::span<const float> query, const QueryParams& params,
                          QueryStats* stats, QueryScratch* scratch, Count&& count) {
  params.validate();
  if (data.rows() != index.num_points()) {
    throw Error(ErrorKind::kDimensionMismatch, "dataset has " + std::to_string(data.rows()) +
                                                   " rows, index has " +
                                                   std::to_string(index.num_points()));
  }
  QueryScratch local;
  QueryScratch& work = scratch != nullptr ? *scratch : local;
  count(index, query, params.alpha, work);
  const CandidateSet candidates =
      select_candidates(work.scores, params.beta, index.params().num_subspaces);
  if (stats != nullptr) {
    stats->candidate_num = candidates.candidate_num;
    stats->last_collision = candidates.last_collision;
  }
  return rerank(data, query, candidates.ids, params.k);
}

}  // namespace

SearchResult knn_query(const TacoIndex& index, const DatasetMatrix& data,
                       std::span<const float> query, const QueryParams& params,
                       QueryStats* stats, QueryScratch* scratch) {
  return run_pipeline(index, data, query, params, stats, scratch,
                      [](const TacoIndex& i, std::span<const float> q, double a, QueryScratch& w) {
                        count_collisions(i, q, a, w);
                      });
}

SearchResult sc_linear_query(const TacoIndex& index, const DatasetMatrix& data,
                             std::span<const float> query, const QueryParams& params,
                             QueryStats* stats, QueryScratch* scratch) {
  return run_pipeline(index, data, query, params, stats, scratch,
                      [](const TacoIndex& i, std::span<const float> q, double a, QueryScratch& w) {
                        exact_collisions(i, q, a, w);
                      });
}

std::vector<SearchResult> knn_query_batch(const TacoIndex& index, const DatasetMatrix& data,
                                          const DatasetMatrix& queries, const QueryParams& params,
                                          std::size_t threads, std::vector<QueryStats>* stats) {
  params.validate();
  std::vector<SearchResult> results(queries.rows());
  if (stats != nullptr) stats->assign(queries.rows(), {});
  parallel_for(queries.rows(), threads, [&](std::size_t begin, std::size_t end) {
    QueryScratch scratch;
    for (std::size_t q = begin; q < end; ++q) {
      QueryStats* slot = stats != nullptr ? &(*stats)[q] : nullptr;
      results[q] = knn_query(index, data, queries.row(q), params, slot, &scratch);
    }
  });
  return results;
}

}  // namespace taco::engine
