#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <queue>
#include <span>
#include <vector>

#include "taco/clustering.hpp"
#include "taco/matrix.hpp"

namespace taco::imi {

/// Two codebooks over the halves of one subspace plus the cross-product cell
/// map (label1, label2) -> ascending point ids. Cells partition the points.
class InvertedMultiIndex {
 public:
  struct Cell {
    std::uint32_t label1 = 0;
    std::uint32_t label2 = 0;
    std::vector<std::uint32_t> ids;
  };

  InvertedMultiIndex() = default;

  /// Point j goes to cell (labels1[j], labels2[j]).
  InvertedMultiIndex(std::size_t clusters, std::size_t dim1, std::size_t dim2,
                     std::vector<float> codebook1, std::vector<float> codebook2,
                     std::span<const std::uint32_t> labels1,
                     std::span<const std::uint32_t> labels2);

  /// Rebuilds from explicit cells (deserialization). Cells may be listed in
  /// any order; absent cells are empty.
  static InvertedMultiIndex from_cells(std::size_t clusters, std::size_t dim1, std::size_t dim2,
                                       std::vector<float> codebook1, std::vector<float> codebook2,
                                       const std::vector<Cell>& cells, std::size_t num_points);

  std::size_t clusters() const noexcept { return clusters_; }
  std::size_t dim1() const noexcept { return dim1_; }
  std::size_t dim2() const noexcept { return dim2_; }
  std::size_t dim() const noexcept { return dim1_ + dim2_; }
  std::size_t num_points() const noexcept { return ids_.size(); }

  std::span<const float> codebook1() const noexcept { return codebook1_; }
  std::span<const float> codebook2() const noexcept { return codebook2_; }

  std::span<const std::uint32_t> cell(std::size_t label1, std::size_t label2) const {
    const std::size_t key = label1 * clusters_ + label2;
    return {ids_.data() + offsets_[key], offsets_[key + 1] - offsets_[key]};
  }

  /// Non-empty cells in (label1, label2) order.
  std::vector<Cell> nonempty_cells() const;

  bool operator==(const InvertedMultiIndex&) const = default;

 private:
  std::size_t clusters_ = 0;
  std::size_t dim1_ = 0;
  std::size_t dim2_ = 0;
  std::vector<float> codebook1_;
  std::vector<float> codebook2_;
  std::vector<std::uint32_t> offsets_;  // clusters^2 + 1 prefix sums
  std::vector<std::uint32_t> ids_;
};

/// Width of the first half of an s-dimensional subspace: ceil(s / 2).
inline std::size_t split_point(std::size_t subspace_dim) { return (subspace_dim + 1) / 2; }

/// Trains both codebooks with sqrt(num_cells) clusters each and fills the cells.
InvertedMultiIndex build_subspace_index(const DatasetMatrix& subspace_data, std::size_t num_cells,
                                        std::size_t iterations, std::uint64_t seed,
                                        std::size_t threads = 0);

/// Squared distances from each query half to every centroid (indexed by
/// label) and the labels sorted by ascending distance, ties by label.
struct CentroidOrder {
  std::vector<float> dists1;
  std::vector<std::uint32_t> idx1;
  std::vector<float> dists2;
  std::vector<std::uint32_t> idx2;
};

CentroidOrder sorted_centroid_distances(const InvertedMultiIndex& index,
                                        std::span<const float> query_subspace);

/// ceil(alpha * n), capped at n.
std::size_t collision_threshold(double alpha, std::size_t n);

struct PopRecord {
  float sum = 0.0f;
  std::uint32_t label1 = 0;
  std::uint32_t label2 = 0;
  std::uint32_t rank1 = 0;  // position in idx1
  std::uint32_t rank2 = 0;  // position in idx2

  bool operator==(const PopRecord&) const = default;
};

struct ActivationResult {
  std::vector<std::span<const std::uint32_t>> retrieved_clusters;
  std::size_t retrieved_num = 0;
  std::vector<PopRecord> pop_trace;
};

namespace detail {

// Visitor signature: void(const PopRecord&, std::span<const std::uint32_t> ids).
// Returns the number of retrieved ids.
template <typename Visit>
std::size_t heap_activation(std::size_t threshold, const CentroidOrder& order,
                            const InvertedMultiIndex& index, Visit&& visit) {
  struct Entry {
    float sum;
    std::uint32_t pos;
  };
  struct Later {
    bool operator()(const Entry& a, const Entry& b) const {
      return a.sum > b.sum || (a.sum == b.sum && a.pos > b.pos);
    }
  };
  const auto last = static_cast<std::uint32_t>(index.clusters() - 1);
  const auto& d1 = order.dists1;
  const auto& d2 = order.dists2;
  const auto& i1 = order.idx1;
  const auto& i2 = order.idx2;

  std::vector<std::uint32_t> active(index.clusters(), 0);
  std::vector<Entry> storage;
  storage.reserve(index.clusters());
  std::priority_queue<Entry, std::vector<Entry>, Later> frontier(Later{}, std::move(storage));
  frontier.push({d1[i1[0]] + d2[i2[0]], 0});

  std::size_t retrieved = 0;
  while (!frontier.empty()) {
    const Entry top = frontier.top();
    const std::uint32_t pos = top.pos;
    const std::uint32_t col = active[pos];
    const auto ids = index.cell(i1[pos], i2[col]);
    visit(PopRecord{top.sum, i1[pos], i2[col], pos, col}, ids);
    retrieved += ids.size();
    if (retrieved >= threshold) break;
    frontier.pop();
    if (col == 0 && pos < last) frontier.push({d1[i1[pos + 1]] + d2[i2[0]], pos + 1});
    if (col < last) {
      active[pos] = col + 1;
      frontier.push({d1[i1[pos]] + d2[i2[col + 1]], pos});
    }
  }
  return retrieved;
}

template <typename Visit>
std::size_t linear_activation(std::size_t threshold, const CentroidOrder& order,
                              const InvertedMultiIndex& index, Visit&& visit) {
  const std::size_t rows = index.clusters();
  const auto last = static_cast<std::uint32_t>(rows - 1);
  const auto& d1 = order.dists1;
  const auto& d2 = order.dists2;
  const auto& i1 = order.idx1;
  const auto& i2 = order.idx2;

  std::vector<std::uint32_t> active(rows, 0);
  std::vector<float> current(rows, 0.0f);
  std::vector<char> alive(rows, 0);
  std::size_t activated = 1;
  current[0] = d1[i1[0]] + d2[i2[0]];
  alive[0] = 1;

  std::size_t retrieved = 0;
  while (true) {
    std::size_t best = rows;
    for (std::size_t r = 0; r < activated; ++r) {
      if (alive[r] && (best == rows || current[r] < current[best])) best = r;
    }
    if (best == rows) break;
    const auto pos = static_cast<std::uint32_t>(best);
    const std::uint32_t col = active[pos];
    const auto ids = index.cell(i1[pos], i2[col]);
    visit(PopRecord{current[pos], i1[pos], i2[col], pos, col}, ids);
    retrieved += ids.size();
    if (retrieved >= threshold) break;
    if (col == 0 && pos < last) {
      current[pos + 1] = d1[i1[pos + 1]] + d2[i2[0]];
      alive[pos + 1] = 1;
      ++activated;
    }
    if (col < last) {
      active[pos] = col + 1;
      current[pos] = d1[i1[pos]] + d2[i2[col + 1]];
    } else {
      alive[pos] = 0;
    }
  }
  return retrieved;
}

}  // namespace detail

/// Pops cells in ascending centroid-distance-sum order from a min-heap
/// frontier until ceil(alpha * n) ids are retrieved.
ActivationResult scalable_dynamic_activation(double alpha, std::size_t n,
                                             const CentroidOrder& order,
                                             const InvertedMultiIndex& index);

/// Same traversal with the frontier minimum found by a linear scan over the
/// activated rows.
ActivationResult linear_dynamic_activation(double alpha, std::size_t n,
                                           const CentroidOrder& order,
                                           const InvertedMultiIndex& index);

}  // namespace taco::imi
