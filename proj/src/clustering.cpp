#include "taco/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "taco/parallel.hpp"

namespace taco::clustering {
namespace {

double exact_sq(std::span<const float> a, std::span<const float> b) {
  double sum = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double diff = static_cast<double>(a[j]) - static_cast<double>(b[j]);
    sum += diff * diff;
  }
  return sum;
}

std::vector<float> seed_plus_plus(const DatasetMatrix& data, std::size_t k, std::mt19937_64& rng) {
  const std::size_t n = data.rows();
  const std::size_t m = data.cols();
  std::vector<float> centroids(k * m);
  std::vector<double> closest(n, std::numeric_limits<double>::infinity());

  std::uniform_int_distribution<std::size_t> first(0, n - 1);
  std::size_t chosen = first(rng);
  for (std::size_t c = 0; c < k; ++c) {
    std::ranges::copy(data.row(chosen), centroids.begin() + static_cast<std::ptrdiff_t>(c * m));
    if (c + 1 == k) break;
    const std::span<const float> latest(centroids.data() + c * m, m);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      closest[i] = std::min(closest[i], exact_sq(data.row(i), latest));
      total += closest[i];
    }
    if (total <= 0.0) {
      chosen = first(rng);
      continue;
    }
    std::uniform_real_distribution<double> pick(0.0, total);
    double target = pick(rng);
    chosen = n - 1;
    for (std::size_t i = 0; i < n; ++i) {
      target -= closest[i];
      if (target < 0.0 && closest[i] > 0.0) {
        chosen = i;
        break;
      }
    }
    while (closest[chosen] <= 0.0 && chosen > 0) --chosen;
  }
  return centroids;
}

}  // namespace

std::uint32_t assign(std::span<const float> centroids, std::size_t dim,
                     std::span<const float> point) {
  if (point.size() != dim || dim == 0 || centroids.size() % dim != 0) {
    throw Error(ErrorKind::kDimensionMismatch, "point dimension " + std::to_string(point.size()) +
                                                   " vs centroid dimension " + std::to_string(dim));
  }
  const std::size_t k = centroids.size() / dim;
  std::uint32_t best = 0;
  float best_dist = std::numeric_limits<float>::infinity();
  for (std::size_t c = 0; c < k; ++c) {
    const float dist = squared_distance(point, centroids.subspan(c * dim, dim));
    if (dist < best_dist) {
      best_dist = dist;
      best = static_cast<std::uint32_t>(c);
    }
  }
  return best;
}

std::uint32_t assign(const KMeansModel& model, std::span<const float> point) {
  return assign(model.centroids, model.dim, point);
}

KMeansModel kmeans(const DatasetMatrix& data, std::size_t num_clusters,
                   std::size_t max_iterations, std::uint64_t seed, std::size_t threads) {
  const std::size_t n = data.rows();
  const std::size_t m = data.cols();
  if (num_clusters < 1) throw Error(ErrorKind::kParameter, "k-means needs at least one cluster");
  if (max_iterations < 1) throw Error(ErrorKind::kParameter, "k-means needs at least one iteration");
  if (m < 1) throw Error(ErrorKind::kParameter, "k-means needs dimension >= 1");
  if (n < num_clusters) {
    throw Error(ErrorKind::kInsufficientData, "k-means with " + std::to_string(num_clusters) +
                                                  " clusters needs at least as many points, got " +
                                                  std::to_string(n));
  }

  std::mt19937_64 rng(seed);
  KMeansModel model;
  model.num_clusters = num_clusters;
  model.dim = m;
  model.centroids = seed_plus_plus(data, num_clusters, rng);
  model.assignments.assign(n, 0);

  std::vector<std::uint32_t> labels(n);
  std::vector<double> dist(n);
  std::vector<std::size_t> counts(num_clusters);
  std::vector<double> sums(num_clusters * m);

  for (std::size_t iter = 0; iter < max_iterations; ++iter) {
    parallel_for(n, threads, [&](std::size_t begin, std::size_t end) {
      for (std::size_t i = begin; i < end; ++i) {
        labels[i] = assign(model.centroids, m, data.row(i));
        dist[i] = exact_sq(data.row(i), model.centroid(labels[i]));
      }
    });

    std::ranges::fill(counts, 0);
    for (auto l : labels) ++counts[l];
    for (std::size_t e = 0; e < num_clusters; ++e) {
      if (counts[e] != 0) continue;
      // Move the point farthest from its centroid (among clusters that can
      // spare one) into the empty cluster.
      std::size_t far = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (counts[labels[i]] < 2) continue;
        if (far == n || dist[i] > dist[far]) far = i;
      }
      --counts[labels[far]];
      labels[far] = static_cast<std::uint32_t>(e);
      counts[e] = 1;
      dist[far] = 0.0;
      std::ranges::copy(data.row(far), model.centroids.begin() + static_cast<std::ptrdiff_t>(e * m));
    }

    const bool changed = iter == 0 || labels != model.assignments;
    model.assignments = labels;
    if (!changed) break;

    std::ranges::fill(sums, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto row = data.row(i);
      double* acc = sums.data() + labels[i] * m;
      for (std::size_t j = 0; j < m; ++j) acc[j] += row[j];
    }
    for (std::size_t c = 0; c < num_clusters; ++c) {
      for (std::size_t j = 0; j < m; ++j) {
        model.centroids[c * m + j] =
            static_cast<float>(sums[c * m + j] / static_cast<double>(counts[c]));
      }
    }
    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) inertia += exact_sq(data.row(i), model.centroid(labels[i]));
    model.inertia_trace.push_back(inertia);
    model.iterations = iter + 1;
  }
  model.inertia = model.inertia_trace.back();
  return model;
}

}  // namespace taco::clustering
