#include "taco/imi.hpp"

#include <algorithm>
#include <numeric>

#include "taco/seed.hpp"

namespace taco::imi {
namespace {

void check_codebook(const std::vector<float>& codebook, std::size_t clusters, std::size_t dim,
                    const char* name) {
  if (codebook.size() != clusters * dim) {
    throw Error(ErrorKind::kDimensionMismatch,
                std::string(name) + " holds " + std::to_string(codebook.size()) +
                    " values, expected " + std::to_string(clusters * dim));
  }
}

DatasetMatrix columns(const DatasetMatrix& data, std::size_t begin, std::size_t end) {
  DatasetMatrix out(data.rows(), end - begin);
  for (std::size_t i = 0; i < data.rows(); ++i) {
    const auto src = data.row(i);
    std::copy(src.begin() + static_cast<std::ptrdiff_t>(begin),
              src.begin() + static_cast<std::ptrdiff_t>(end), out.row(i).begin());
  }
  return out;
}

}  // namespace

InvertedMultiIndex::InvertedMultiIndex(std::size_t clusters, std::size_t dim1, std::size_t dim2,
                                       std::vector<float> codebook1,
                                       std::vector<float> codebook2,
                                       std::span<const std::uint32_t> labels1,
                                       std::span<const std::uint32_t> labels2)
    : clusters_(clusters),
      dim1_(dim1),
      dim2_(dim2),
      codebook1_(std::move(codebook1)),
      codebook2_(std::move(codebook2)) {
  if (clusters_ < 1) throw Error(ErrorKind::kParameter, "index needs at least one cluster");
  check_codebook(codebook1_, clusters_, dim1_, "codebook1");
  check_codebook(codebook2_, clusters_, dim2_, "codebook2");
  if (labels1.size() != labels2.size()) {
    throw Error(ErrorKind::kDimensionMismatch, "label arrays differ in length");
  }
  const std::size_t cells = clusters_ * clusters_;
  offsets_.assign(cells + 1, 0);
  for (std::size_t j = 0; j < labels1.size(); ++j) {
    if (labels1[j] >= clusters_ || labels2[j] >= clusters_) {
      throw Error(ErrorKind::kBounds, "label out of range for point " + std::to_string(j));
    }
    ++offsets_[labels1[j] * clusters_ + labels2[j] + 1];
  }
  std::partial_sum(offsets_.begin(), offsets_.end(), offsets_.begin());
  ids_.resize(labels1.size());
  std::vector<std::uint32_t> cursor(offsets_.begin(), offsets_.end() - 1);
  for (std::size_t j = 0; j < labels1.size(); ++j) {
    ids_[cursor[labels1[j] * clusters_ + labels2[j]]++] = static_cast<std::uint32_t>(j);
  }
}

InvertedMultiIndex InvertedMultiIndex::from_cells(std::size_t clusters, std::size_t dim1,
                                                  std::size_t dim2, std::vector<float> codebook1,
                                                  std::vector<float> codebook2,
                                                  const std::vector<Cell>& cells,
                                                  std::size_t num_points) {
  std::vector<std::uint32_t> labels1(num_points, 0);
  std::vector<std::uint32_t> labels2(num_points, 0);
  std::vector<char> seen(num_points, 0);
  for (const auto& cell : cells) {
    for (auto id : cell.ids) {
      if (id >= num_points || seen[id]) {
        throw Error(ErrorKind::kCorruption, "cell ids do not partition the points");
      }
      seen[id] = 1;
      labels1[id] = cell.label1;
      labels2[id] = cell.label2;
    }
  }
  if (std::ranges::find(seen, 0) != seen.end()) {
    throw Error(ErrorKind::kCorruption, "cell ids do not cover every point");
  }
  return InvertedMultiIndex(clusters, dim1, dim2, std::move(codebook1), std::move(codebook2),
                            labels1, labels2);
}

std::vector<InvertedMultiIndex::Cell> InvertedMultiIndex::nonempty_cells() const {
  std::vector<Cell> out;
  for (std::size_t a = 0; a < clusters_; ++a) {
    for (std::size_t b = 0; b < clusters_; ++b) {
      const auto ids = cell(a, b);
      if (ids.empty()) continue;
      out.push_back({static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b),
                     std::vector<std::uint32_t>(ids.begin(), ids.end())});
    }
  }
  return out;
}

InvertedMultiIndex build_subspace_index(const DatasetMatrix& subspace_data, std::size_t num_cells,
                                        std::size_t iterations, std::uint64_t seed,
                                        std::size_t threads) {
  const auto clusters = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(num_cells))));
  if (num_cells == 0 || clusters * clusters != num_cells) {
    throw Error(ErrorKind::kParameter,
                "K = " + std::to_string(num_cells) + " is not a perfect square");
  }
  if (clusters > 65536) {
    throw Error(ErrorKind::kParameter, "sqrt(K) must fit in 16-bit labels");
  }
  const std::size_t s = subspace_data.cols();
  if (s < 2) throw Error(ErrorKind::kParameter, "subspace dimension " + std::to_string(s) + " cannot be split in two");
  const std::size_t split = split_point(s);

  const DatasetMatrix first = columns(subspace_data, 0, split);
  const DatasetMatrix second = columns(subspace_data, split, s);
  auto km1 = clustering::kmeans(first, clusters, iterations, derive_seed(seed, 1), threads);
  auto km2 = clustering::kmeans(second, clusters, iterations, derive_seed(seed, 2), threads);
  return InvertedMultiIndex(clusters, split, s - split, std::move(km1.centroids),
                            std::move(km2.centroids), km1.assignments, km2.assignments);
}

CentroidOrder sorted_centroid_distances(const InvertedMultiIndex& index,
                                        std::span<const float> query_subspace) {
  if (query_subspace.size() != index.dim()) {
    throw Error(ErrorKind::kDimensionMismatch,
                "query subspace dimension " + std::to_string(query_subspace.size()) +
                    " vs index dimension " + std::to_string(index.dim()));
  }
  const std::size_t k = index.clusters();
  CentroidOrder order;
  auto fill = [k](std::span<const float> half, std::span<const float> codebook, std::size_t dim,
                  std::vector<float>& dists, std::vector<std::uint32_t>& idx) {
    dists.resize(k);
    for (std::size_t c = 0; c < k; ++c) {
      dists[c] = clustering::squared_distance(half, codebook.subspan(c * dim, dim));
    }
    idx.resize(k);
    std::iota(idx.begin(), idx.end(), 0u);
    std::ranges::sort(idx, [&](std::uint32_t a, std::uint32_t b) {
      return dists[a] < dists[b] || (dists[a] == dists[b] && a < b);
    });
  };
  fill(query_subspace.first(index.dim1()), index.codebook1(), index.dim1(), order.dists1,
       order.idx1);
  fill(query_subspace.subspan(index.dim1()), index.codebook2(), index.dim2(), order.dists2,
       order.idx2);
  return order;
}

std::size_t collision_threshold(double alpha, std::size_t n) {
  if (!(alpha > 0.0)) throw Error(ErrorKind::kParameter, "collision ratio must be positive");
  const double target = std::ceil(alpha * static_cast<double>(n));
  if (target >= static_cast<double>(n)) return n;
  return static_cast<std::size_t>(target);
}

namespace {

template <typename Traversal>
ActivationResult collect(double alpha, std::size_t n, const CentroidOrder& order,
                         const InvertedMultiIndex& index, Traversal&& traversal) {
  if (order.idx1.size() != index.clusters() || order.idx2.size() != index.clusters()) {
    throw Error(ErrorKind::kDimensionMismatch, "centroid order does not match index");
  }
  ActivationResult result;
  result.retrieved_num = traversal(collision_threshold(alpha, n), order, index,
                                   [&](const PopRecord& pop, std::span<const std::uint32_t> ids) {
                                     result.pop_trace.push_back(pop);
                                     result.retrieved_clusters.push_back(ids);
                                   });
  return result;
}

}  // namespace

ActivationResult scalable_dynamic_activation(double alpha, std::size_t n,
                                             const CentroidOrder& order,
                                             const InvertedMultiIndex& index) {
  return collect(alpha, n, order, index, [](auto&&... args) {
    return detail::heap_activation(std::forward<decltype(args)>(args)...);
  });
}

ActivationResult linear_dynamic_activation(double alpha, std::size_t n,
                                           const CentroidOrder& order,
                                           const InvertedMultiIndex& index) {
  return collect(alpha, n, order, index, [](auto&&... args) {
    return detail::linear_activation(std::forward<decltype(args)>(args)...);
  });
}

}  // namespace taco::imi
