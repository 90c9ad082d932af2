#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "taco/matrix.hpp"

namespace taco::dataio {

/// Element encoding of a TEXMEX-style vector file (.fvecs / .ivecs).
enum class ElementKind { kFloat32, kInt32 };

/// Reads every record of an fvecs/ivecs file. Int32 elements are converted to
/// float; use read_ids() to keep them exact.
DatasetMatrix read_vectors(const std::string& path, ElementKind kind = ElementKind::kFloat32);
void write_vectors(const DatasetMatrix& matrix, const std::string& path,
                   ElementKind kind = ElementKind::kFloat32);

IdMatrix read_ids(const std::string& path);
void write_ids(const IdMatrix& matrix, const std::string& path);

struct Subset {
  DatasetMatrix rows;
  std::vector<std::uint32_t> original_ids;  // original_ids[i] is the source row of rows.row(i)
};

/// m distinct rows drawn uniformly with a generator seeded by `seed`.
Subset sample_subset(const DatasetMatrix& matrix, std::size_t m, std::uint64_t seed);

/// Removes the listed row ids, keeping the survivors in their original order.
Subset remove_rows(const DatasetMatrix& matrix, std::span<const std::uint32_t> ids);

struct Neighbor {
  std::uint32_t id = 0;
  float distance = 0.0f;

  bool operator==(const Neighbor&) const = default;
};

/// Orders by distance, then id.
inline bool neighbor_less(const Neighbor& a, const Neighbor& b) {
  return a.distance < b.distance || (a.distance == b.distance && a.id < b.id);
}

/// Exact k nearest base ids per query; row q holds k neighbors ascending.
class GroundTruth {
 public:
  GroundTruth() = default;
  GroundTruth(std::size_t queries, std::size_t k) : k_(k), neighbors_(queries * k) {}

  std::size_t queries() const noexcept { return k_ == 0 ? 0 : neighbors_.size() / k_; }
  std::size_t k() const noexcept { return k_; }

  std::span<const Neighbor> row(std::size_t q) const { return {neighbors_.data() + q * k_, k_}; }
  std::span<Neighbor> row(std::size_t q) { return {neighbors_.data() + q * k_, k_}; }

 private:
  std::size_t k_ = 0;
  std::vector<Neighbor> neighbors_;
};

/// Euclidean distance, float inputs accumulated in double.
double l2_distance(std::span<const float> a, std::span<const float> b);
double l2_distance_sq(std::span<const float> a, std::span<const float> b);

GroundTruth compute_ground_truth(const DatasetMatrix& base, const DatasetMatrix& queries,
                                 std::size_t k, std::size_t threads = 0);

/// Persists as `<prefix>.ivecs` (ids) and `<prefix>.fvecs` (distances).
void save_ground_truth(const GroundTruth& truth, const std::string& ids_path,
                       const std::string& distances_path);
GroundTruth load_ground_truth(const std::string& ids_path, const std::string& distances_path);

}  // namespace taco::dataio
