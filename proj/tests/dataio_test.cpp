#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>

#include "support.hpp"
#include "taco/dataio.hpp"

namespace taco {
namespace {

using dataio::ElementKind;
using testing::TempDir;

void write_raw(const std::string& path, const std::vector<std::int32_t>& words) {
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(words.data()),
            static_cast<std::streamsize>(words.size() * 4));
}

std::int32_t float_word(float f) {
  std::int32_t w;
  std::memcpy(&w, &f, 4);
  return w;
}

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no taco::Error thrown";
  return ErrorKind::kState;
}

TEST(ReadVectors, SingleRecord) {
  TempDir dir;
  const auto path = dir.file("one.fvecs");
  write_raw(path, {2, float_word(1.0f), float_word(2.0f)});
  const auto m = dataio::read_vectors(path);
  ASSERT_EQ(m.rows(), 1u);
  ASSERT_EQ(m.cols(), 2u);
  EXPECT_EQ(m(0, 0), 1.0f);
  EXPECT_EQ(m(0, 1), 2.0f);
}

TEST(ReadVectors, RoundTripIsBitExact) {
  TempDir dir;
  auto m = testing::gaussian_matrix(17, 9, 3);
  m(4, 2) = -0.0f;
  m(5, 5) = 1e-38f;
  dataio::write_vectors(m, dir.file("a.fvecs"));
  EXPECT_EQ(dataio::read_vectors(dir.file("a.fvecs")), m);

  DatasetMatrix ints(3, 2, {1, -2, 3, 40000, -7, 0});
  dataio::write_vectors(ints, dir.file("a.ivecs"), ElementKind::kInt32);
  EXPECT_EQ(dataio::read_vectors(dir.file("a.ivecs"), ElementKind::kInt32), ints);

  IdMatrix ids(2, 3, {5, 6, 7, -1, 2147483647, 0});
  dataio::write_ids(ids, dir.file("b.ivecs"));
  EXPECT_EQ(dataio::read_ids(dir.file("b.ivecs")), ids);
}

TEST(ReadVectors, InconsistentDimensionNamesBoth) {
  TempDir dir;
  const auto path = dir.file("bad.fvecs");
  write_raw(path, {2, float_word(1), float_word(2), 3, float_word(1), float_word(2), float_word(3)});
  try {
    dataio::read_vectors(path);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kFormat);
    const std::string msg = e.what();
    EXPECT_NE(msg.find('2'), std::string::npos);
    EXPECT_NE(msg.find('3'), std::string::npos);
  }
}

TEST(ReadVectors, TruncatedRecordReportsOffset) {
  TempDir dir;
  const auto path = dir.file("trunc.fvecs");
  write_raw(path, {2, float_word(1), float_word(2), 2, float_word(1)});
  try {
    dataio::read_vectors(path);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kFormat);
    EXPECT_NE(std::string(e.what()).find("12"), std::string::npos);
  }
}

TEST(ReadVectors, EmptyFileAndMissingFile) {
  TempDir dir;
  write_raw(dir.file("empty.fvecs"), {});
  EXPECT_EQ(kind_of([&] { dataio::read_vectors(dir.file("empty.fvecs")); }), ErrorKind::kEmptyInput);
  EXPECT_EQ(kind_of([&] { dataio::read_vectors(dir.file("absent.fvecs")); }), ErrorKind::kIo);
}

TEST(WriteVectors, Errors) {
  TempDir dir;
  const auto m = testing::gaussian_matrix(2, 2, 1);
  EXPECT_EQ(kind_of([&] { dataio::write_vectors(m, dir.file("no/such/dir/x.fvecs")); }),
            ErrorKind::kIo);
  EXPECT_EQ(kind_of([&] { dataio::write_vectors(DatasetMatrix(0, 3), dir.file("z.fvecs")); }),
            ErrorKind::kEmptyInput);
}

TEST(WriteVectors, FileSizeFollowsRecordFormula) {
  TempDir dir;
  const auto path = dir.file("m.fvecs");
  dataio::write_vectors(testing::gaussian_matrix(3, 4, 9), path);
  const std::size_t d = 4;
  EXPECT_EQ(std::filesystem::file_size(path), 3 * (4 + 4 * d));
}

TEST(SampleSubset, FullSampleIsPermutation) {
  const auto m = testing::gaussian_matrix(50, 3, 2);
  const auto s = dataio::sample_subset(m, 50, 11);
  std::vector<std::uint32_t> ids = s.original_ids;
  std::sort(ids.begin(), ids.end());
  std::vector<std::uint32_t> expect(50);
  std::iota(expect.begin(), expect.end(), 0u);
  EXPECT_EQ(ids, expect);
  for (std::size_t i = 0; i < 50; ++i) {
    EXPECT_TRUE(std::ranges::equal(s.rows.row(i), m.row(s.original_ids[i])));
  }
}

TEST(SampleSubset, Deterministic) {
  const auto m = testing::gaussian_matrix(40, 3, 2);
  EXPECT_EQ(dataio::sample_subset(m, 1, 5).original_ids, dataio::sample_subset(m, 1, 5).original_ids);
  const auto a = dataio::sample_subset(m, 20, 8);
  const auto b = dataio::sample_subset(m, 20, 8);
  EXPECT_EQ(a.original_ids, b.original_ids);
  EXPECT_EQ(a.rows, b.rows);
  EXPECT_EQ(std::set<std::uint32_t>(a.original_ids.begin(), a.original_ids.end()).size(), 20u);
}

TEST(SampleSubset, TooLargeIsBoundsError) {
  const auto m = testing::gaussian_matrix(4, 3, 2);
  EXPECT_EQ(kind_of([&] { dataio::sample_subset(m, 5, 0); }), ErrorKind::kBounds);
}

TEST(RemoveRows, KeepsOrder) {
  const auto m = testing::gaussian_matrix(6, 2, 2);
  const std::vector<std::uint32_t> drop{4, 1};
  const auto kept = dataio::remove_rows(m, drop);
  EXPECT_EQ(kept.original_ids, (std::vector<std::uint32_t>{0, 2, 3, 5}));
  EXPECT_TRUE(std::ranges::equal(kept.rows.row(2), m.row(3)));
}

TEST(GroundTruth, OneDimensionalExample) {
  DatasetMatrix base(3, 1, {0.0f, 1.0f, 3.0f});
  DatasetMatrix q(1, 1, {0.9f});
  const auto gt = dataio::compute_ground_truth(base, q, 2);
  ASSERT_EQ(gt.k(), 2u);
  EXPECT_EQ(gt.row(0)[0].id, 1u);
  EXPECT_EQ(gt.row(0)[1].id, 0u);
  EXPECT_NEAR(gt.row(0)[0].distance, 0.1, 1e-6);
  EXPECT_NEAR(gt.row(0)[1].distance, 0.9, 1e-6);
}

TEST(GroundTruth, ExactDuplicateFirst) {
  const auto base = testing::gaussian_matrix(30, 5, 4);
  DatasetMatrix q(1, 5);
  std::ranges::copy(base.row(7), q.row(0).begin());
  const auto gt = dataio::compute_ground_truth(base, q, 3);
  EXPECT_EQ(gt.row(0)[0].id, 7u);
  EXPECT_EQ(gt.row(0)[0].distance, 0.0f);
}

// Reference distances coded independently: float differences squared in
// long double, sorted by (distance, id).
TEST(GroundTruth, MatchesExhaustiveOracleAndIsThreadInvariant) {
  const auto base = testing::gaussian_matrix(300, 12, 5);
  const auto queries = testing::gaussian_matrix(20, 12, 6);
  const std::size_t k = 300;
  const auto gt1 = dataio::compute_ground_truth(base, queries, k, 1);
  const auto gt4 = dataio::compute_ground_truth(base, queries, k, 4);
  for (std::size_t q = 0; q < queries.rows(); ++q) {
    std::vector<std::pair<long double, std::uint32_t>> ref;
    for (std::uint32_t i = 0; i < base.rows(); ++i) {
      long double acc = 0;
      for (std::size_t j = 0; j < 12; ++j) {
        const long double diff = static_cast<long double>(queries(q, j)) - base(i, j);
        acc += diff * diff;
      }
      ref.emplace_back(std::sqrt(acc), i);
    }
    std::sort(ref.begin(), ref.end());
    for (std::size_t r = 0; r < k; ++r) {
      EXPECT_EQ(gt1.row(q)[r].id, ref[r].second);
      EXPECT_NEAR(gt1.row(q)[r].distance, static_cast<double>(ref[r].first),
                  1e-5 * static_cast<double>(ref[r].first));
      EXPECT_EQ(gt1.row(q)[r], gt4.row(q)[r]);
      if (r > 0) EXPECT_LE(gt1.row(q)[r - 1].distance, gt1.row(q)[r].distance);
    }
  }
}

TEST(GroundTruth, TiesBrokenById) {
  DatasetMatrix base(4, 1, {2.0f, -1.0f, 1.0f, -2.0f});
  DatasetMatrix q(1, 1, {0.0f});
  const auto gt = dataio::compute_ground_truth(base, q, 4);
  EXPECT_EQ(gt.row(0)[0].id, 1u);
  EXPECT_EQ(gt.row(0)[1].id, 2u);
  EXPECT_EQ(gt.row(0)[2].id, 0u);
  EXPECT_EQ(gt.row(0)[3].id, 3u);
}

TEST(GroundTruth, DimensionMismatch) {
  const auto base = testing::gaussian_matrix(5, 3, 1);
  const auto q = testing::gaussian_matrix(1, 4, 1);
  try {
    dataio::compute_ground_truth(base, q, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kDimensionMismatch);
    EXPECT_NE(std::string(e.what()).find('3'), std::string::npos);
    EXPECT_NE(std::string(e.what()).find('4'), std::string::npos);
  }
}

TEST(GroundTruth, SaveLoadRoundTrip) {
  TempDir dir;
  const auto gt = dataio::compute_ground_truth(testing::gaussian_matrix(40, 4, 1),
                                               testing::gaussian_matrix(6, 4, 2), 10);
  dataio::save_ground_truth(gt, dir.file("gt.ivecs"), dir.file("gt.fvecs"));
  const auto back = dataio::load_ground_truth(dir.file("gt.ivecs"), dir.file("gt.fvecs"));
  ASSERT_EQ(back.queries(), 6u);
  for (std::size_t q = 0; q < 6; ++q) {
    EXPECT_TRUE(std::ranges::equal(back.row(q), gt.row(q)));
  }
}

TEST(Distance, MatchesDefinition) {
  const std::vector<float> a{1, 2, 3}, b{4, 6, 3};
  EXPECT_DOUBLE_EQ(dataio::l2_distance(a, b), 5.0);
  EXPECT_DOUBLE_EQ(dataio::l2_distance_sq(a, b), 25.0);
}

}  // namespace
}  // namespace taco
