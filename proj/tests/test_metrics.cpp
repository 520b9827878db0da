#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "trajad/errors.hpp"
#include "trajad/metrics.hpp"

using namespace trajad;

TEST(RocAuc, PerfectSeparationIsOne) {
  EXPECT_DOUBLE_EQ(roc_auc({{0.1, 0.2, 0.8, 0.9}, {0, 0, 1, 1}}), 1.0);
}

TEST(RocAuc, InterleavedPairs) {
  EXPECT_DOUBLE_EQ(roc_auc({{0.1, 0.2, 0.3, 0.4}, {0, 1, 0, 1}}), 0.75);
}

TEST(RocAuc, AllTiedIsHalf) {
  EXPECT_DOUBLE_EQ(roc_auc({{0.5, 0.5, 0.5, 0.5, 0.5}, {0, 1, 0, 1, 1}}), 0.5);
}

TEST(RocAuc, SingleClassIsDataError) {
  EXPECT_THROW(roc_auc({{0.1, 0.2}, {1, 1}}), DataError);
  EXPECT_THROW(roc_auc({{0.1, 0.2}, {0, 0}}), DataError);
}

TEST(RocAuc, NegatedScoresComplementWithoutTies) {
  std::mt19937_64 rng(3);
  for (int k = 0; k < 20; ++k) {
    ScoredSet s = oracle::random_set(rng, 150, false);
    ScoredSet neg = s;
    for (double& v : neg.scores) v = -v;
    EXPECT_NEAR(roc_auc(s) + roc_auc(neg), 1.0, 1e-12);
  }
}

TEST(RocAuc, InvariantUnderIncreasingTransform) {
  std::mt19937_64 rng(4);
  ScoredSet s = oracle::random_set(rng, 200, true);
  ScoredSet t = s;
  for (double& v : t.scores) v = std::exp(3 * v) - 7;
  EXPECT_DOUBLE_EQ(roc_auc(s), roc_auc(t));
}

TEST(RocAuc, DuplicateItemMovesOnlyByTieContribution) {
  std::mt19937_64 rng(5);
  ScoredSet s = oracle::random_set(rng, 100, true);
  ScoredSet d = s;
  d.scores.push_back(s.scores[0]);
  d.labels.push_back(s.labels[0]);
  EXPECT_NEAR(roc_auc(d), oracle::roc_auc_pairs(d), 1e-12);
}

TEST(PrAuc, PerfectSeparationIsOne) { EXPECT_DOUBLE_EQ(pr_auc({{0.1, 0.2, 0.8, 0.9}, {0, 0, 1, 1}}), 1.0); }

TEST(PrAuc, NoAnomaliesIsDataError) { EXPECT_THROW(pr_auc({{0.1, 0.2}, {0, 0}}), DataError); }

TEST(PrAuc, RandomScoresApproachPrevalence) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0, 1);
  double total = 0.0;
  const int draws = 200;
  for (int k = 0; k < draws; ++k) {
    ScoredSet s;
    for (int i = 0; i < 500; ++i) {
      s.scores.push_back(u(rng));
      s.labels.push_back(i % 5 == 0);
    }
    total += pr_auc(s);
  }
  EXPECT_NEAR(total / draws, 0.2, 0.01);
}

TEST(F1AtRecall, PerfectSeparationTenAnomalies) {
  ScoredSet s;
  for (int i = 0; i < 10; ++i) s.scores.push_back(1.0 + i), s.labels.push_back(1);
  for (int i = 0; i < 30; ++i) s.scores.push_back(-1.0 - i), s.labels.push_back(0);
  EXPECT_NEAR(f1_at_recall(s, 0.8), 2 * 0.8 / 1.8, 1e-12);
}

TEST(F1AtRecall, AllEqualGivesPrevalenceForm) {
  ScoredSet s;
  for (int i = 0; i < 40; ++i) s.scores.push_back(0.3), s.labels.push_back(i < 8);
  const double pi = 8.0 / 40.0;
  EXPECT_NEAR(f1_at_recall(s, 0.8), 2 * pi / (1 + pi), 1e-12);
}

class MetricOracle : public ::testing::TestWithParam<bool> {};

TEST_P(MetricOracle, MatchesThresholdSweep) {
  std::mt19937_64 rng(GetParam() ? 11 : 12);
  for (int k = 0; k < 100; ++k) {
    const ScoredSet s = oracle::random_set(rng, 200, GetParam());
    EXPECT_NEAR(roc_auc(s), oracle::roc_auc_pairs(s), 1e-9);
    EXPECT_NEAR(pr_auc(s), oracle::pr_auc_sweep(s), 1e-9);
    EXPECT_NEAR(f1_at_recall(s, 0.8), oracle::f1_sweep(s, 0.8), 1e-9);
  }
}

INSTANTIATE_TEST_SUITE_P(TiesAndDistinct, MetricOracle, ::testing::Bool());

TEST(RocPoints, SpanUnitSquareMonotonically) {
  std::mt19937_64 rng(7);
  const auto pts = roc_points(oracle::random_set(rng, 120, true));
  ASSERT_GE(pts.size(), 2u);
  EXPECT_EQ(pts.front(), std::make_pair(0.0, 0.0));
  EXPECT_EQ(pts.back(), std::make_pair(1.0, 1.0));
  for (std::size_t i = 1; i < pts.size(); ++i) {
    EXPECT_GE(pts[i].first, pts[i - 1].first);
    EXPECT_GE(pts[i].second, pts[i - 1].second);
  }
}
