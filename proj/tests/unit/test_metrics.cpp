#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "contpat/common.hpp"
#include "contpat/metrics.hpp"

using namespace contpat;

TEST(PrCurve, Examples) {
  const std::vector<double> s{0.9, 0.8, 0.2};
  const std::vector<int> y{1, 1, 0};
  const auto c = pr_curve(s, y);
  ASSERT_EQ(c.size(), 3u);
  EXPECT_DOUBLE_EQ(c[0].precision, 1.0);
  EXPECT_DOUBLE_EQ(c[0].recall, 0.5);
  EXPECT_DOUBLE_EQ(c[1].precision, 1.0);
  EXPECT_DOUBLE_EQ(c[1].recall, 1.0);
  EXPECT_DOUBLE_EQ(c[2].precision, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(c[2].recall, 1.0);
  EXPECT_EQ(c[2].tp + c[2].fp + c[2].fn + c[2].tn, 3u);
  EXPECT_DOUBLE_EQ(c[0].threshold, 0.9);

  const std::vector<int> ones{1, 1, 1};
  for (const auto& p : pr_curve(s, ones)) EXPECT_DOUBLE_EQ(p.precision, 1.0);

  const std::vector<int> none{0, 0, 0};
  EXPECT_THROW(pr_curve(s, none), DataError);
  const std::vector<int> bad{0, 2, 1};
  EXPECT_THROW(pr_curve(s, bad), LabelError);
  const std::vector<int> short_labels{1};
  EXPECT_THROW(pr_curve(s, short_labels), DimensionError);
}

TEST(PrCurve, TiesShareOnePoint) {
  const std::vector<double> s{0.5, 0.5, 0.5, 0.1};
  const std::vector<int> y{1, 0, 1, 0};
  const auto c = pr_curve(s, y);
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c[0].tp, 2u);
  EXPECT_EQ(c[0].fp, 1u);
  // Any permutation of the tie group gives the same curve.
  const std::vector<double> s2{0.1, 0.5, 0.5, 0.5};
  const std::vector<int> y2{0, 0, 1, 1};
  const auto c2 = pr_curve(s2, y2);
  ASSERT_EQ(c2.size(), 2u);
  EXPECT_EQ(c2[0].precision, c[0].precision);
}

TEST(Auc, Examples) {
  const std::vector<double> sep{0.9, 0.8, 0.3, 0.1};
  const std::vector<int> y{1, 1, 0, 0};
  const double area = auc_p50(pr_curve(sep, y));
  EXPECT_DOUBLE_EQ(area, 0.5);
  EXPECT_DOUBLE_EQ(auc_percent(area), 100.0);

  const std::vector<double> inv{0.9, 0.1};
  const std::vector<int> yi{0, 1};
  const auto c = pr_curve(inv, yi);
  ASSERT_EQ(c.size(), 2u);
  EXPECT_DOUBLE_EQ(c[1].precision, 0.5);
  EXPECT_DOUBLE_EQ(auc_p50(c), 0.0);
}

TEST(Auc, RandomBalancedNearPrior) {
  // A 0.5-positive-rate set ranked at random keeps precision at the prior
  // 0.5, so the expected band area is 0.
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> s(10000);
    std::vector<int> y(10000);
    for (std::size_t i = 0; i < s.size(); ++i) {
      s[i] = u(rng);
      y[i] = i % 2;
    }
    EXPECT_NEAR(auc_percent(auc_p50(pr_curve(s, y))), 0.0, 3.0);
  }
}

TEST(Auc, MonotoneTransformInvariance) {
  Rng rng(9);
  std::normal_distribution<double> n;
  std::bernoulli_distribution b(0.3);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> s(50), t(50);
    std::vector<int> y(50);
    for (std::size_t i = 0; i < s.size(); ++i) {
      s[i] = std::round(n(rng) * 4) / 4;  // ties included
      y[i] = b(rng);
    }
    y[0] = 1;
    for (std::size_t i = 0; i < s.size(); ++i) t[i] = std::exp(2 * s[i]) - 7;
    EXPECT_EQ(auc_p50(pr_curve(s, y)), auc_p50(pr_curve(t, y)));
  }
}

TEST(Auc, CorrectlyRankedAdditionNeverHurts) {
  Rng rng(10);
  std::uniform_int_distribution<int> grid(0, 4);
  std::bernoulli_distribution b(0.5);
  for (int trial = 0; trial < 5000; ++trial) {
    std::vector<double> s(1 + trial % 11);
    std::vector<int> y(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
      s[i] = grid(rng);
      y[i] = b(rng);
    }
    y[0] = 1;
    const double before = auc_percent(auc_p50(pr_curve(s, y)));
    auto s2 = s;
    auto y2 = y;
    // A positive above every score, or a negative below every score.
    const bool positive = b(rng);
    s2.push_back(positive ? *std::max_element(s.begin(), s.end()) + 1 : *std::min_element(s.begin(), s.end()) - 1);
    y2.push_back(positive ? 1 : 0);
    EXPECT_GE(auc_percent(auc_p50(pr_curve(s2, y2))), before - 1e-9);
  }
}

TEST(TuneThreshold, Examples) {
  const std::vector<double> s{0.9, 0.2};
  const std::vector<int> y{1, 0};
  const auto t = tune_threshold(s, y);
  EXPECT_DOUBLE_EQ(t.threshold, 0.55);
  EXPECT_DOUBLE_EQ(t.f1, 1.0);

  const std::vector<int> all_pos{1, 1};
  EXPECT_THROW(tune_threshold(s, all_pos), DataError);
  const std::vector<int> all_neg{0, 0};
  EXPECT_THROW(tune_threshold(s, all_neg), DataError);

  EXPECT_EQ(threshold_candidates(std::vector<double>{0.3, 0.1, 0.3}), (std::vector<double>{-0.9, 0.2, 1.3}));
}

TEST(TuneThreshold, GridOptimalSmallestTieAndBeatsZero) {
  Rng rng(11);
  std::normal_distribution<double> n;
  std::bernoulli_distribution b(0.35);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> s(3 + trial % 30);
    std::vector<int> y(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
      s[i] = trial % 2 ? std::round(n(rng) * 2) / 2 : n(rng);
      y[i] = b(rng);
    }
    y[0] = 1;
    y[1] = 0;
    const auto best = tune_threshold(s, y);
    double best_f1 = -1, first_at = 0;
    for (double t : threshold_candidates(s)) {
      const double f1 = confusion_at(s, y, t).f1();
      if (f1 > best_f1) {
        best_f1 = f1;
        first_at = t;
      }
    }
    EXPECT_EQ(best.f1, best_f1);
    EXPECT_EQ(best.threshold, first_at);
    EXPECT_GE(best.f1, confusion_at(s, y, 0.0).f1());
  }
}

TEST(Report, Examples) {
  const std::vector<double> s{0.9, 0.7, 0.2, 0.1};
  const std::vector<int> y{1, 1, 0, 0};
  const auto r = classification_report(s, y, 0.5);
  EXPECT_DOUBLE_EQ(r.precision, 1.0);
  EXPECT_DOUBLE_EQ(r.recall, 1.0);
  EXPECT_DOUBLE_EQ(r.f1, 1.0);
  EXPECT_DOUBLE_EQ(r.auc_percent, 100.0);
  EXPECT_DOUBLE_EQ(r.auc, 0.5);

  const auto high = classification_report(s, y, 0.95);
  EXPECT_DOUBLE_EQ(high.recall, 0.0);
  EXPECT_DOUBLE_EQ(high.f1, 0.0);
  EXPECT_DOUBLE_EQ(high.precision, 0.0);

  // Strict rule: a score equal to the threshold is negative.
  const auto tie = classification_report(s, y, 0.7);
  EXPECT_EQ(tie.confusion.tp, 1u);
  EXPECT_EQ(tie.confusion.fn, 1u);
}

TEST(Report, MatchesBruteForce) {
  Rng rng(12);
  std::uniform_real_distribution<double> u(-1, 1);
  std::bernoulli_distribution b(0.4);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> s(20);
    std::vector<int> y(20);
    for (std::size_t i = 0; i < s.size(); ++i) {
      s[i] = u(rng);
      y[i] = b(rng);
    }
    y[3] = 1;
    const double t = u(rng);
    const auto r = classification_report(s, y, t);
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      const bool pred = s[i] > t;
      tp += pred && y[i];
      fp += pred && !y[i];
      fn += !pred && y[i];
    }
    const double p = tp + fp ? double(tp) / double(tp + fp) : 0.0;
    const double rc = double(tp) / double(tp + fn);
    EXPECT_EQ(r.confusion.tp, tp);
    EXPECT_EQ(r.confusion.fp, fp);
    EXPECT_EQ(r.precision, p);
    EXPECT_EQ(r.recall, rc);
    EXPECT_DOUBLE_EQ(r.f1, p + rc > 0 ? 2 * p * rc / (p + rc) : 0.0);
    for (const auto& pt : r.curve) {
      EXPECT_EQ(pt.tp + pt.fp + pt.fn + pt.tn, s.size());
      EXPECT_GE(pt.precision, 0.0);
      EXPECT_LE(pt.precision, 1.0);
    }
    EXPECT_GE(r.auc, 0.0);
    EXPECT_LE(r.auc, 0.5);
  }
}
