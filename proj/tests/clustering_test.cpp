#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "support.hpp"
#include "taco/clustering.hpp"

namespace taco {
namespace {

using clustering::kmeans;

TEST(KMeans, SingleClusterIsColumnMean) {
  const auto data = testing::gaussian_matrix(100, 3, 4);
  const auto model = kmeans(data, 1, 10, 1);
  for (std::size_t j = 0; j < 3; ++j) {
    double mean = 0;
    for (std::size_t i = 0; i < 100; ++i) mean += data(i, j);
    EXPECT_NEAR(model.centroids[j], mean / 100, 1e-5);
  }
  for (auto l : model.assignments) EXPECT_EQ(l, 0u);
}

TEST(KMeans, DistinctPointsPerfectPartition) {
  const auto data = testing::gaussian_matrix(12, 4, 9);
  const auto model = kmeans(data, 12, 10, 3);
  EXPECT_NEAR(model.inertia, 0.0, 1e-9);
  std::vector<std::uint32_t> labels = model.assignments;
  std::sort(labels.begin(), labels.end());
  EXPECT_EQ(std::unique(labels.begin(), labels.end()), labels.end());
}

TEST(KMeans, OneDimensionalExample) {
  DatasetMatrix data(4, 1, {0, 1, 10, 11});
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto model = kmeans(data, 2, 5, seed);
    std::vector<float> c = model.centroids;
    std::sort(c.begin(), c.end());
    EXPECT_FLOAT_EQ(c[0], 0.5f);
    EXPECT_FLOAT_EQ(c[1], 10.5f);
    EXPECT_DOUBLE_EQ(model.inertia, 1.0);
  }
}

TEST(KMeans, InertiaMonotoneAndNoEmptyCluster) {
  const auto data = testing::clustered_dataset(3000, 4, 2, 3, 4, 20);
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto model = kmeans(data, 32, 25, seed);
    ASSERT_FALSE(model.inertia_trace.empty());
    for (std::size_t i = 1; i < model.inertia_trace.size(); ++i) {
      EXPECT_LE(model.inertia_trace[i], model.inertia_trace[i - 1] * (1 + 1e-12));
    }
    std::vector<std::size_t> counts(32, 0);
    for (auto l : model.assignments) {
      ASSERT_LT(l, 32u);
      ++counts[l];
    }
    for (auto c : counts) EXPECT_GT(c, 0u);
  }
}

TEST(KMeans, EmptyClusterRepairWithDuplicates) {
  DatasetMatrix data(10, 2);
  for (std::size_t i = 0; i < 10; ++i) data(i, 0) = i < 7 ? 0.0f : static_cast<float>(i);
  const auto model = kmeans(data, 4, 10, 0);
  std::vector<std::size_t> counts(4, 0);
  for (auto l : model.assignments) ++counts[l];
  for (auto c : counts) EXPECT_GT(c, 0u);
}

TEST(KMeans, DeterministicAcrossThreadCounts) {
  const auto data = testing::clustered_dataset(5000, 6, 4, 5, 6, 30);
  const auto a = kmeans(data, 16, 15, 42, 1);
  const auto b = kmeans(data, 16, 15, 42, 4);
  EXPECT_EQ(a.centroids, b.centroids);
  EXPECT_EQ(a.assignments, b.assignments);
  EXPECT_EQ(a.inertia, b.inertia);
}

TEST(KMeans, TooFewPoints) {
  try {
    kmeans(testing::gaussian_matrix(3, 2, 1), 4, 5, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kInsufficientData);
  }
}

TEST(Assign, ExactAndTies) {
  const std::vector<float> centroids{0, 0, 2, 0, -2, 0, 5, 5};
  EXPECT_EQ(clustering::assign(centroids, 2, std::vector<float>{5, 5}), 3u);
  EXPECT_EQ(clustering::assign(centroids, 2, std::vector<float>{0, 3}), 0u);
  const std::vector<float> tie{9, 9, 1, 0, -1, 0};
  EXPECT_EQ(clustering::assign(tie, 2, std::vector<float>{0, 0}), 1u);
}

TEST(Assign, MatchesLinearScanOracle) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal;
  std::vector<float> centroids(50 * 7);
  for (auto& v : centroids) v = static_cast<float>(normal(rng));
  for (int t = 0; t < 500; ++t) {
    std::vector<float> p(7);
    for (auto& v : p) v = static_cast<float>(normal(rng));
    std::size_t best = 0;
    double best_d = 1e300;
    for (std::size_t c = 0; c < 50; ++c) {
      double d = 0;
      for (std::size_t j = 0; j < 7; ++j) d += (double(p[j]) - centroids[c * 7 + j]) * (double(p[j]) - centroids[c * 7 + j]);
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    EXPECT_EQ(clustering::assign(centroids, 7, p), best);
  }
}

TEST(Assign, DimensionMismatch) {
  const std::vector<float> centroids{0, 0, 1, 1};
  EXPECT_THROW(clustering::assign(centroids, 2, std::vector<float>{1, 2, 3}), Error);
}

}  // namespace
}  // namespace taco
