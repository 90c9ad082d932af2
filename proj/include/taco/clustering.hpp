#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "taco/matrix.hpp"

namespace taco::clustering {

struct KMeansModel {
  std::size_t num_clusters = 0;
  std::size_t dim = 0;
  std::vector<float> centroids;  // num_clusters x dim, row-major
  std::vector<std::uint32_t> assignments;
  double inertia = 0.0;
  std::vector<double> inertia_trace;  // inertia after each completed Lloyd update
  std::size_t iterations = 0;

  std::span<const float> centroid(std::size_t c) const {
    return {centroids.data() + c * dim, dim};
  }
};

/// k-means++ seeding followed by at most `max_iterations` Lloyd rounds.
/// Stops early once an assignment pass changes no label.
KMeansModel kmeans(const DatasetMatrix& data, std::size_t num_clusters,
                   std::size_t max_iterations, std::uint64_t seed, std::size_t threads = 0);

/// Squared Euclidean distance in float; the kernel shared by training and
/// query-side centroid scans.
inline float squared_distance(std::span<const float> a, std::span<const float> b) {
  float sum = 0.0f;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const float diff = a[j] - b[j];
    sum += diff * diff;
  }
  return sum;
}

/// Nearest centroid, ties to the lowest label.
std::uint32_t assign(std::span<const float> centroids, std::size_t dim,
                     std::span<const float> point);
std::uint32_t assign(const KMeansModel& model, std::span<const float> point);

}  // namespace taco::clustering
