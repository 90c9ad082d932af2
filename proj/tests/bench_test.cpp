#include <gtest/gtest.h>

#include <sstream>

#include "support.hpp"
#include "taco/bench.hpp"

namespace taco {
namespace {

using dataio::Neighbor;

std::vector<Neighbor> make(std::initializer_list<std::pair<std::uint32_t, float>> items) {
  std::vector<Neighbor> out;
  for (auto [id, d] : items) out.push_back({id, d});
  return out;
}

std::size_t count_lines(const std::string& s) { return std::count(s.begin(), s.end(), '\n'); }

TEST(Recall, Examples) {
  const auto truth = make({{1, 1}, {2, 2}, {3, 3}, {4, 4}});
  EXPECT_DOUBLE_EQ(bench::recall(truth, truth, 4), 1.0);
  EXPECT_DOUBLE_EQ(bench::recall(make({{9, 1}, {8, 1}, {7, 1}, {6, 1}}), truth, 4), 0.0);
  EXPECT_DOUBLE_EQ(bench::recall(make({{4, 1}, {9, 1}, {2, 1}, {1, 1}}), truth, 4), 0.75);
  EXPECT_THROW(bench::recall(truth, truth, 5), Error);
}

TEST(Mre, Examples) {
  const auto truth = make({{1, 1}, {2, 2}});
  EXPECT_DOUBLE_EQ(bench::mre(truth, truth, 2).value, 0.0);
  EXPECT_DOUBLE_EQ(bench::mre(make({{1, 1}, {5, 3}}), truth, 2).value, 0.25);
  const auto scaled = make({{1, 1.1f}, {2, 2.2f}});
  EXPECT_NEAR(bench::mre(scaled, truth, 2).value, 0.1, 1e-6);
  EXPECT_THROW(bench::mre(truth, truth, 3), Error);
}

TEST(Mre, ZeroDistanceGuard) {
  const auto truth = make({{1, 0}, {2, 2}});
  EXPECT_DOUBLE_EQ(bench::mre(make({{1, 0}, {2, 2}}), truth, 2).value, 0.0);
  const auto r = bench::mre(make({{3, 1}, {2, 2}}), truth, 2);
  EXPECT_EQ(r.skipped, 1u);
  EXPECT_DOUBLE_EQ(r.value, 0.0);
}

TEST(FormatNumber, SixSignificantDigits) {
  EXPECT_EQ(bench::format_number(0.123456789), "0.123457");
  EXPECT_EQ(bench::format_number(1234567.0), "1.23457e+06");
  EXPECT_EQ(bench::format_number(50), "50");
}

class BenchFixture : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    data_ = new DatasetMatrix(testing::clustered_dataset(5000, 32, 31, 32, 10, 20));
    queries_ = new DatasetMatrix(testing::clustered_dataset(20, 32, 31, 33, 10, 20));
    engine::IndexParams p{4, 4, 64, 10, 1};
    index_ = new engine::TacoIndex(engine::build_index(*data_, p, {true, 2}));
    truth_ = new dataio::GroundTruth(dataio::compute_ground_truth(*data_, *queries_, 20));
  }
  static void TearDownTestSuite() {
    delete truth_;
    delete index_;
    delete queries_;
    delete data_;
  }
  static DatasetMatrix* data_;
  static DatasetMatrix* queries_;
  static engine::TacoIndex* index_;
  static dataio::GroundTruth* truth_;
};

DatasetMatrix* BenchFixture::data_ = nullptr;
DatasetMatrix* BenchFixture::queries_ = nullptr;
engine::TacoIndex* BenchFixture::index_ = nullptr;
dataio::GroundTruth* BenchFixture::truth_ = nullptr;

TEST_F(BenchFixture, GridRowsAndCsv) {
  bench::BenchmarkConfig config;
  config.alphas = {0.01, 0.05, 0.1};
  config.betas = {0.005, 0.01, 0.02};
  config.k = 10;
  config.timed_passes = 1;
  const auto rows = bench::run_benchmark(*index_, *data_, *queries_, *truth_, config);
  ASSERT_EQ(rows.size(), 9u);
  for (const auto& m : rows) {
    EXPECT_GE(m.recall, 0.0);
    EXPECT_LE(m.recall, 1.0);
    EXPECT_GE(m.mre, 0.0);
    EXPECT_GT(m.qps, 0.0);
    EXPECT_EQ(m.index_bytes, engine::serialize_index(*index_).size());
    EXPECT_EQ(m.per_query.size(), 20u);
  }
  for (std::size_t a = 0; a < 3; ++a) {
    for (std::size_t b = 1; b < 3; ++b) {
      EXPECT_GE(rows[a * 3 + b].mean_candidates, rows[a * 3 + b - 1].mean_candidates);
    }
  }
  std::ostringstream csv;
  bench::write_metrics_csv(csv, rows);
  EXPECT_EQ(count_lines(csv.str()), 10u);
  std::ostringstream per_query;
  bench::write_query_records_csv(per_query, rows);
  EXPECT_EQ(count_lines(per_query.str()), 1u + 9u * 20u);
}

TEST_F(BenchFixture, SinglePointGridAndDeterminism) {
  bench::BenchmarkConfig config;
  config.k = 10;
  config.threads = 1;
  config.timed_passes = 1;
  const auto a = bench::run_benchmark(*index_, *data_, *queries_, *truth_, config);
  const auto b = bench::run_benchmark(*index_, *data_, *queries_, *truth_, config);
  ASSERT_EQ(a.size(), 1u);
  EXPECT_EQ(a[0].recall, b[0].recall);
  EXPECT_EQ(a[0].mre, b[0].mre);
}

TEST_F(BenchFixture, MissingTruthDepth) {
  bench::BenchmarkConfig config;
  config.k = 50;
  EXPECT_THROW(bench::run_benchmark(*index_, *data_, *queries_, *truth_, config), Error);
}

TEST_F(BenchFixture, PersistedResultsGiveSameMetrics) {
  testing::TempDir dir;
  engine::QueryParams qp{0.05, 0.01, 10};
  const auto results = engine::knn_query_batch(*index_, *data_, *queries_, qp, 2);
  engine::save_results(results, 10, dir.file("r.ivecs"), dir.file("r.fvecs"));
  dataio::save_ground_truth(*truth_, dir.file("gt.ivecs"), dir.file("gt.fvecs"));
  const auto back = engine::load_results(dir.file("r.ivecs"), dir.file("r.fvecs"));
  const auto truth = dataio::load_ground_truth(dir.file("gt.ivecs"), dir.file("gt.fvecs"));
  for (std::size_t q = 0; q < results.size(); ++q) {
    EXPECT_EQ(bench::recall(back[q], truth.row(q), 10), bench::recall(results[q], truth_->row(q), 10));
    EXPECT_EQ(bench::mre(back[q], truth.row(q), 10).value, bench::mre(results[q], truth_->row(q), 10).value);
  }
}

TEST_F(BenchFixture, CompareActivationsIdenticalAndCsv) {
  const std::vector<double> alphas{0.01, 0.05};
  const auto rows = bench::compare_activations(*index_, *queries_, alphas, 2);
  ASSERT_EQ(rows.size(), 2u);
  for (const auto& r : rows) {
    EXPECT_TRUE(r.identical);
    EXPECT_GT(r.mean_pops, 0.0);
    EXPECT_EQ(r.num_cells, 64u);
  }
  std::ostringstream csv;
  bench::write_activation_csv(csv, rows);
  EXPECT_EQ(count_lines(csv.str()), 3u);
}

TEST_F(BenchFixture, ParetoSeparation) {
  bench::ParetoConfig config;
  config.k = 20;
  config.threads = 2;
  const auto report = bench::pareto_report(*index_, *data_, *queries_, config);
  EXPECT_GT(report.mean_near(), report.mean_global());
  EXPECT_NEAR(report.mean_global(), 4 * imi::collision_threshold(0.05, 5000) / 5000.0, 1e-9);
  std::ostringstream hist;
  bench::write_pareto_histogram_csv(hist, report);
  const std::string text = hist.str();
  EXPECT_EQ(text.substr(0, text.find('\n')), "query,group,h0,h1,h2,h3,h4");
  EXPECT_EQ(count_lines(text), 1u + 2u * 20u);
  for (const auto& q : report.queries) {
    std::size_t total = 0;
    for (auto h : q.near_histogram) total += h;
    for (auto h : q.rest_histogram) total += h;
    EXPECT_EQ(total, 5000u);
  }
}

TEST(Pareto, SingleSubspaceScoresAreBinary) {
  const auto data = testing::gaussian_matrix(2000, 8, 3);
  const auto queries = testing::gaussian_matrix(5, 8, 4);
  auto index = engine::build_index(data, {1, 4, 16, 5, 0}, {true, 1});
  bench::ParetoConfig config;
  config.k = 10;
  const auto report = bench::pareto_report(index, data, queries, config);
  for (const auto& q : report.queries) {
    EXPECT_EQ(q.near_histogram.size(), 2u);
    EXPECT_GE(q.p_neighbor, 0.0);
    EXPECT_LE(q.p_neighbor, 1.0);
  }
  EXPECT_GT(report.near_ratio(), 1.0);
}

TEST(Pareto, UniformDataNearAboveGlobal) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<float> u(0, 1);
  DatasetMatrix data(3000, 24), queries(10, 24);
  for (auto& v : data.values()) v = u(rng);
  for (auto& v : queries.values()) v = u(rng);
  auto index = engine::build_index(data, {6, 4, 16, 5, 0}, {true, 1});
  bench::ParetoConfig config;
  config.k = 10;
  const auto report = bench::pareto_report(index, data, queries, config);
  EXPECT_GT(report.mean_near(), report.mean_global());
}

}  // namespace
}  // namespace taco
