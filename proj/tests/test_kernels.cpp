#include <gtest/gtest.h>

#include <cstring>

#include "fprk/kernels.hpp"
#include "fprk/kmeans.hpp"
#include "fprk/metrics.hpp"
#include "test_util.hpp"

using namespace fprk;

namespace {

std::vector<EmbeddingRecord> records(std::size_t n, std::size_t dim, std::uint64_t seed) {
  CounterRng rng(derive_key(seed, {}));
  std::vector<EmbeddingRecord> out;
  for (std::size_t i = 0; i < n; ++i)
    out.push_back(fprk::testing::rec("r" + std::to_string(i), "s" + std::to_string(i % 5),
                                     Role::gallery, fprk::testing::gaussian_vector(rng, dim)));
  return out;
}

bool bit_equal(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

class ThreadCounts : public ::testing::TestWithParam<int> {
 protected:
  void SetUp() override { set_thread_count(GetParam()); }
  void TearDown() override { set_thread_count(0); }
};

}  // namespace

TEST_P(ThreadCounts, SimilarityMatrixBitIdentical) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto q = records(37, 65, seed);
    const auto g = records(113, 65, seed + 100);
    const VectorBlock qb(fprk::testing::pointers(q)), gb(fprk::testing::pointers(g));
    EXPECT_TRUE(bit_equal(kernels::similarity_matrix_serial(qb, gb),
                          kernels::similarity_matrix_parallel(qb, gb)));
  }
}

TEST_P(ThreadCounts, AssignNearestIdentical) {
  CounterRng rng(9);
  const std::size_t n = 2001, k = 7, dim = 13;
  std::vector<double> pts(n * dim), cents(k * dim);
  for (auto& x : pts) x = rng.next_gaussian();
  for (auto& x : cents) x = rng.next_gaussian();
  std::vector<std::size_t> a1(n), a2(n);
  std::vector<double> d1(n), d2(n);
  kernels::assign_nearest_serial(pts, cents, dim, a1, d1);
  kernels::assign_nearest_parallel(pts, cents, dim, a2, d2);
  EXPECT_EQ(a1, a2);
  EXPECT_TRUE(bit_equal(d1, d2));
}

TEST_P(ThreadCounts, KMeansSerialEqualsParallel) {
  CounterRng rng(21);
  std::vector<double> pts(500 * 6);
  for (auto& x : pts) x = rng.next_gaussian();
  KMeansOptions opt;
  opt.k = 9;
  opt.seed = 4;
  opt.exec = Exec::serial;
  const auto s = kmeans(pts, 6, opt);
  opt.exec = Exec::parallel;
  const auto p = kmeans(pts, 6, opt);
  EXPECT_EQ(s, p);
}

TEST_P(ThreadCounts, ScoreQueriesSerialEqualsParallel) {
  const auto g = records(200, 32, 1);
  const auto q = records(40, 32, 2);
  const GalleryIndex index(fprk::testing::pointers(g));
  const auto qp = fprk::testing::pointers(q);
  const auto s = score_queries(qp, index, Exec::serial);
  const auto p = score_queries(qp, index, Exec::parallel);
  ASSERT_EQ(s.size(), p.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    EXPECT_EQ(s[i].query_id, p[i].query_id);
    EXPECT_EQ(std::memcmp(&s[i].ap, &p[i].ap, sizeof(double)), 0);
    EXPECT_EQ(s[i].first_relevant_rank, p[i].first_relevant_rank);
  }
}

INSTANTIATE_TEST_SUITE_P(Threads, ThreadCounts, ::testing::Values(1, 2, 3, 8));

TEST(Kernels, TiesGoToLowerCentroid) {
  const std::vector<double> pts = {0.0};
  const std::vector<double> cents = {-1.0, 1.0};
  std::vector<std::size_t> a(1);
  std::vector<double> d(1);
  kernels::assign_nearest_serial(pts, cents, 1, a, d);
  EXPECT_EQ(a[0], 0u);
  EXPECT_EQ(d[0], 1.0);
}

TEST(Kernels, CosineClamped) {
  const std::vector<float> u = {1e-20f, 1.0f};
  EXPECT_LE(cosine_from_norms(u, u, norm64(u), norm64(u)), 1.0);
}
