#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "taco/dataio.hpp"
#include "taco/imi.hpp"
#include "taco/matrix.hpp"
#include "taco/spectral.hpp"

namespace taco::engine {

inline constexpr std::uint16_t kIndexFormatVersion = 1;

struct IndexParams {
  std::size_t num_subspaces = 6;  // N_s
  std::size_t subspace_dim = 8;   // s
  std::size_t num_cells = 4096;   // K, clusters per subspace; sqrt(K) per codebook
  std::size_t kmeans_iterations = 20;
  std::uint64_t seed = 0;

  std::size_t clusters_per_codebook() const;
  /// Throws kParameter / kCapacity when the parameters do not fit (dim, n).
  void validate(std::size_t dim, std::size_t n) const;

  bool operator==(const IndexParams&) const = default;
};

struct QueryParams {
  double alpha = 0.05;  // collision ratio
  double beta = 0.005;  // re-rank ratio
  std::size_t k = 50;

  void validate() const;
};

struct BuildOptions {
  bool retain_transformed = false;  // keep the transformed corpus for sc_linear_query
  std::size_t threads = 0;
};

struct BuildMetadata {
  double transform_seconds = 0.0;
  double index_seconds = 0.0;
  double reduction_percent = 0.0;  // 100 * (1 - N_s*s / d)
  std::vector<std::string> warnings;
};

class TacoIndex {
 public:
  TacoIndex() = default;
  TacoIndex(IndexParams params, std::size_t num_points, spectral::TransformModel transform,
            std::vector<imi::InvertedMultiIndex> subspaces);

  const IndexParams& params() const noexcept { return params_; }
  std::size_t num_points() const noexcept { return num_points_; }
  std::size_t dim() const noexcept { return transform_.dim(); }
  const spectral::TransformModel& transform() const noexcept { return transform_; }
  const std::vector<imi::InvertedMultiIndex>& subspaces() const noexcept { return subspaces_; }

  const BuildMetadata& metadata() const noexcept { return metadata_; }
  BuildMetadata& metadata() noexcept { return metadata_; }

  bool has_transformed() const noexcept { return transformed_.has_value(); }
  const DatasetMatrix& transformed() const;
  /// Recomputes and keeps the transformed corpus (e.g. after load_index).
  void retain_transformed(const DatasetMatrix& data, std::size_t threads = 0);
  void set_transformed(DatasetMatrix transformed);

 private:
  IndexParams params_;
  std::size_t num_points_ = 0;
  spectral::TransformModel transform_;
  std::vector<imi::InvertedMultiIndex> subspaces_;
  BuildMetadata metadata_;
  std::optional<DatasetMatrix> transformed_;
};

TacoIndex build_index(const DatasetMatrix& data, const IndexParams& params,
                      const BuildOptions& options = {});

/// One counter per point in [0, N_s].
using SCScoreTable = std::vector<std::uint8_t>;

/// Per-query scratch; reuse across queries on one thread.
struct QueryScratch {
  std::vector<float> transformed;
  SCScoreTable scores;
};

SCScoreTable count_collisions(const TacoIndex& index, std::span<const float> query, double alpha);
void count_collisions(const TacoIndex& index, std::span<const float> query, double alpha,
                      QueryScratch& scratch);

/// Exact collision counting: in every subspace the ceil(alpha * n) points
/// nearest to the query (ties by id) collide. Needs the transformed corpus.
SCScoreTable exact_collisions(const TacoIndex& index, std::span<const float> query, double alpha);
void exact_collisions(const TacoIndex& index, std::span<const float> query, double alpha,
                      QueryScratch& scratch);

struct CandidateSet {
  std::vector<std::uint32_t> ids;  // ascending
  std::size_t candidate_num = 0;
  int last_collision = 0;
  std::vector<std::size_t> histogram;  // histogram[c] = points with score c
};

/// Query-aware threshold: scans score levels from N_s downward, admitting a
/// level while it fits in the remaining beta * n budget; the level that
/// overflows the budget is admitted too.
CandidateSet select_candidates(std::span<const std::uint8_t> scores, double beta,
                               std::size_t num_subspaces);

using SearchResult = std::vector<dataio::Neighbor>;

SearchResult rerank(const DatasetMatrix& data, std::span<const float> query,
                    std::span<const std::uint32_t> candidates, std::size_t k);

struct QueryStats {
  std::size_t candidate_num = 0;
  int last_collision = 0;
};

SearchResult knn_query(const TacoIndex& index, const DatasetMatrix& data,
                       std::span<const float> query, const QueryParams& params,
                       QueryStats* stats = nullptr, QueryScratch* scratch = nullptr);

/// Index-free pipeline: exact collision counting, candidate selection, re-rank.
SearchResult sc_linear_query(const TacoIndex& index, const DatasetMatrix& data,
                             std::span<const float> query, const QueryParams& params,
                             QueryStats* stats = nullptr, QueryScratch* scratch = nullptr);

/// Batch helper: results[q] for every query row, parallel over queries.
std::vector<SearchResult> knn_query_batch(const TacoIndex& index, const DatasetMatrix& data,
                                          const DatasetMatrix& queries, const QueryParams& params,
                                          std::size_t threads = 0,
                                          std::vector<QueryStats>* stats = nullptr);

std::vector<std::uint8_t> serialize_index(const TacoIndex& index);
TacoIndex deserialize_index(std::span<const std::uint8_t> bytes);
void save_index(const TacoIndex& index, const std::string& path);
TacoIndex load_index(const std::string& path);

/// Writes results as `ids` ivecs + `distances` fvecs with k columns; short
/// rows are padded with id -1 and distance FLT_MAX.
void save_results(const std::vector<SearchResult>& results, std::size_t k,
                  const std::string& ids_path, const std::string& distances_path);
std::vector<SearchResult> load_results(const std::string& ids_path,
                                       const std::string& distances_path);

}  // namespace taco::engine
