#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fprk/engine.hpp"
#include "fprk/error.hpp"
#include "fprk/metrics.hpp"
#include "fprk/synth.hpp"
#include "test_util.hpp"

using namespace fprk;

namespace {

double cos64(std::span<const double> a, std::span<const double> b) {
  double d = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    d += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return d / std::sqrt(na * nb);
}

// Mean AP over every permutation of n items with r relevant, by enumeration.
double exhaustive_random_ap(std::size_t n, std::size_t r) {
  std::vector<std::uint8_t> rel(n, 0);
  std::fill(rel.end() - static_cast<std::ptrdiff_t>(r), rel.end(), 1);
  double sum = 0;
  std::size_t count = 0;
  do {
    sum += average_precision(rel);
    ++count;
  } while (std::next_permutation(rel.begin(), rel.end()));
  return sum / static_cast<double>(count);
}

}  // namespace

TEST(Drift, Endpoints) {
  const std::vector<double> s = {3, 4}, d = {0, 1};
  const auto same = apply_drift(s, d, 0.0);
  EXPECT_NEAR(same[0], 0.6, 1e-15);
  EXPECT_NEAR(same[1], 0.8, 1e-15);
  const auto full = apply_drift(s, d, 1.0);
  EXPECT_EQ(full, (std::vector<double>{0, 1}));
}

TEST(Drift, HalfwayBetweenOrthogonalUnits) {
  const std::vector<double> s = {1, 0}, d = {0, 1};
  const auto h = apply_drift(s, d, 0.5);
  EXPECT_NEAR(h[0], std::sqrt(0.5), 1e-15);
  EXPECT_NEAR(h[1], std::sqrt(0.5), 1e-15);
  EXPECT_NEAR(cos64(h, s), 0.7071067811865476, 1e-15);
  EXPECT_NEAR(cos64(h, d), 0.7071067811865476, 1e-15);
}

TEST(Drift, Errors) {
  const std::vector<double> s = {1, 0}, d = {-1, 0};
  EXPECT_THROW(apply_drift(s, d, 0.5), ValidationError);
  EXPECT_THROW(apply_drift(s, d, -0.1), ValidationError);
  EXPECT_THROW(apply_drift(s, d, 1.1), ValidationError);
}

TEST(Synth, ZeroNoiseSamplesEqualCentroid) {
  SynthConfig cfg;
  cfg.identities = 4;
  cfg.dim = 16;
  cfg.noise = 0;
  cfg.seed = 3;
  const auto set = generate_synthetic_dataset(cfg);
  const auto centroids = synth_centroids(cfg);
  for (const auto& r : set.records()) {
    if (r.role == Role::generated) continue;
    const auto i = static_cast<std::size_t>(std::stoul(r.subject.substr(2)));
    for (std::size_t j = 0; j < cfg.dim; ++j)
      EXPECT_EQ(r.vector[j], static_cast<float>(centroids[i * cfg.dim + j]));
  }
}

TEST(Synth, DeterministicAndSeedSensitive) {
  SynthConfig cfg;
  cfg.identities = 3;
  cfg.dim = 8;
  cfg.drift = 0.4;
  cfg.seed = 11;
  const auto a = generate_synthetic_dataset(cfg);
  EXPECT_EQ(a, generate_synthetic_dataset(cfg));
  set_thread_count(1);
  EXPECT_EQ(a, generate_synthetic_dataset(cfg));
  set_thread_count(0);
  cfg.seed = 12;
  EXPECT_NE(a, generate_synthetic_dataset(cfg));
}

TEST(Synth, LayoutAndNaming) {
  SynthConfig cfg;
  cfg.identities = 10;
  cfg.dim = 4;
  const auto set = generate_synthetic_dataset(cfg);
  EXPECT_EQ(set.size(), 10u * (5 + 10 + 5));
  EXPECT_EQ(set.manifest().subjects.front(), "id00");
  EXPECT_NE(set.find("id03-g007"), nullptr);
  EXPECT_EQ(set.find("id03-g007")->role, Role::gallery);
  EXPECT_EQ(set.find("id03-q004")->method, "synth");
  EXPECT_EQ(synth_subject(5, 100), "id05");
  EXPECT_EQ(synth_subject(5, 101), "id005");
}

TEST(Synth, ConfigValidationAndJson) {
  SynthConfig cfg;
  cfg.drift = 0.3;
  cfg.seed = 99;
  EXPECT_EQ(synth_config_from_json(synth_config_to_json(cfg)), cfg);
  cfg.drift = 1.5;
  EXPECT_THROW(cfg.validate(), ValidationError);
  cfg.drift = 0;
  cfg.identities = 1;
  EXPECT_THROW(cfg.validate(), ValidationError);
}

TEST(Synth, DistractorsAreNearestOtherCentroid) {
  SynthConfig cfg;
  cfg.identities = 6;
  cfg.dim = 5;
  cfg.seed = 2;
  const auto c = synth_centroids(cfg);
  const auto spec = nearest_distractors(c, cfg.dim, 0.5);
  for (std::size_t i = 0; i < 6; ++i) {
    const std::span<const double> ci(c.data() + i * 5, 5);
    EXPECT_NE(spec.distractor[i], i);
    const double chosen = cos64(ci, std::span<const double>(c.data() + spec.distractor[i] * 5, 5));
    for (std::size_t j = 0; j < 6; ++j)
      if (j != i) EXPECT_LE(cos64(ci, std::span<const double>(c.data() + j * 5, 5)), chosen);
  }
}

TEST(Synth, SeparableOracleMapWithHandScan) {
  SynthConfig cfg;  // 10 identities x 10 gallery, d = 512, noise 0.05
  cfg.seed = 5;
  const auto set = generate_synthetic_dataset(cfg);
  const auto spec = gallery_from_roles(set);
  RunKey key{"synth", "synthetic", kOracleMethod, "default"};
  const auto run = evaluate_oracle(set, spec, key, EvalOptions{});
  EXPECT_GE(run.map_per_query, 0.99);

  // Hand-rolled scan for one query: every same-subject gallery item must
  // outrank every other item.
  const auto& q = *set.find("id00-r000");
  double worst_pos = 2, best_neg = -2;
  for (std::size_t i : set.indices(Role::gallery)) {
    const auto& g = set[i];
    double d = 0, a = 0, b = 0;
    for (std::size_t j = 0; j < q.vector.size(); ++j) {
      d += double(q.vector[j]) * g.vector[j];
      a += double(q.vector[j]) * q.vector[j];
      b += double(g.vector[j]) * g.vector[j];
    }
    const double c = d / std::sqrt(a * b);
    if (g.subject == q.subject)
      worst_pos = std::min(worst_pos, c);
    else
      best_neg = std::max(best_neg, c);
  }
  EXPECT_GT(worst_pos, best_neg);
  for (const auto& r : run.per_query)
    if (r.query_id == "id00-r000") EXPECT_EQ(r.ap, 1.0);
}

TEST(BruteForceAp, Examples) {
  const std::vector<double> sims = {0.9, 0.5, 0.4};
  const std::vector<std::string> ids = {"a", "b", "c"};
  EXPECT_NEAR(brute_force_ap(sims, ids, std::vector<std::uint8_t>{1, 0, 1}), (1 + 2.0 / 3) / 2, 1e-15);
  EXPECT_EQ(brute_force_ap(sims, ids, std::vector<std::uint8_t>{1, 1, 1}), 1.0);
  // Tie between "b" (irrelevant) and "a" (relevant): "a" wins on id.
  const std::vector<double> tie = {0.5, 0.5};
  EXPECT_EQ(brute_force_ap(tie, std::vector<std::string>{"b", "a"}, std::vector<std::uint8_t>{0, 1}), 1.0);
  EXPECT_EQ(brute_force_ap(tie, std::vector<std::string>{"a", "b"}, std::vector<std::uint8_t>{0, 1}), 0.5);
}

TEST(MonteCarlo, AllRelevantHasZeroVariance) {
  const std::vector<GalleryComposition> c = {{5, 5}};
  const auto est = monte_carlo_random_map(c, 100, 1);
  EXPECT_EQ(est.mean, 1.0);
  EXPECT_EQ(est.std_error, 0.0);
}

TEST(MonteCarlo, OneOfTwo) {
  EXPECT_DOUBLE_EQ(exhaustive_random_ap(2, 1), 0.75);
  const std::vector<GalleryComposition> c = {{2, 1}};
  const auto est = monte_carlo_random_map(c, 10000, 3);
  EXPECT_NEAR(est.mean, 0.75, 3 * est.std_error + 1e-12);
}

TEST(MonteCarlo, HarmonicClosedForm) {
  double h = 0;
  for (int k = 1; k <= 10; ++k) h += 1.0 / k;
  const double exact = h / 10;
  EXPECT_NEAR(exact, 0.29289682539682, 1e-12);
  EXPECT_NEAR(exhaustive_random_ap(10, 1), exact, 1e-12);
  const std::vector<GalleryComposition> c = {{10, 1}};
  const auto est = monte_carlo_random_map(c, 10000, 7);
  EXPECT_EQ(est.trials, 10000u);
  EXPECT_LE(std::abs(est.mean - exact), 3 * est.std_error);
}

TEST(MonteCarlo, MatchesEnumerationForSmallCompositions) {
  for (std::size_t n = 2; n <= 8; ++n)
    for (std::size_t r = 1; r <= n; ++r) {
      const std::vector<GalleryComposition> c = {{n, r}};
      const auto est = monte_carlo_random_map(c, 4000, n * 10 + r);
      EXPECT_LE(std::abs(est.mean - exhaustive_random_ap(n, r)), 4 * est.std_error + 1e-12) << n << "," << r;
    }
}
