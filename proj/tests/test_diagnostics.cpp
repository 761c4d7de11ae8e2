#include <gtest/gtest.h>

#include <cmath>

#include "leadlag/diagnostics.hpp"
#include "support.hpp"

using namespace leadlag;
using leadlag::testing::coupled_logistic;
using leadlag::testing::uniform_noise;

TEST(FrequencySeries, AbsentWordAndSimpleRatio) {
  CorpusPair c(3, Vocabulary::synthetic(10));
  c.add(Document::make("a", 1, Side::lead, {{2, 5}, {3, 45}}));
  c.add(Document::make("b", 3, Side::lead, {{3, 10}}));
  const auto absent = word_frequency_series(c, 7, Side::lead);
  for (double v : absent.values) EXPECT_EQ(v, 0.0);
  const auto s = word_frequency_series(c, 2, Side::lead);
  EXPECT_DOUBLE_EQ(s.values[0], 0.1);
  EXPECT_TRUE(s.empty_slice[1]);
  EXPECT_FALSE(s.empty_slice[2]);
  EXPECT_EQ(s.values[1], 0.0);
  EXPECT_THROW(word_frequency_series(c, 10, Side::lead), ValidationError);
}

TEST(FrequencySeries, DuplicatingDocumentsLeavesSeriesUnchanged) {
  CorpusPair once(2, Vocabulary::synthetic(5)), twice(2, Vocabulary::synthetic(5));
  const std::vector<Document> docs{Document::make("a", 1, Side::lag, {{0, 3}, {1, 2}}),
                                   Document::make("b", 1, Side::lag, {{1, 4}}),
                                   Document::make("c", 2, Side::lag, {{0, 1}, {4, 6}})};
  for (const auto& d : docs) {
    once.add(d);
    twice.add(d);
    twice.add(d);
  }
  for (int w = 0; w < 5; ++w)
    EXPECT_EQ(word_frequency_series(once, w, Side::lag).values, word_frequency_series(twice, w, Side::lag).values);
}

TEST(Ccf, ShiftedIdentityPeaksAtTrueLag) {
  Rng rng = make_rng(21);
  const auto base = leadlag::testing::gaussian_noise(62, rng);
  // x_t = base_{t+2} and y_t = base_t, so y_t = x_{t-2}
  const std::vector<double> x(base.begin() + 2, base.end()), y(base.begin(), base.end() - 2);
  const CcfResult r = lagged_ccf(x, y, 5);
  EXPECT_NEAR(*r.at(2), 1.0, 1e-12);
  for (int s = -5; s <= 5; ++s)
    if (s != 2) EXPECT_LT(*r.at(s), 1.0 - 1e-6);
}

TEST(Ccf, IdenticalSeriesAtLagZero) {
  Rng rng = make_rng(3);
  const auto x = leadlag::testing::gaussian_noise(40, rng);
  EXPECT_NEAR(*lagged_ccf(x, x, 3).at(0), 1.0, 1e-12);
}

TEST(Ccf, ArgumentSwapMirrorsLags) {
  Rng rng = make_rng(4);
  const auto x = leadlag::testing::gaussian_noise(50, rng), y = leadlag::testing::gaussian_noise(50, rng);
  const CcfResult xy = lagged_ccf(x, y, 6), yx = lagged_ccf(y, x, 6);
  for (int s = -6; s <= 6; ++s) EXPECT_NEAR(*xy.at(s), *yx.at(-s), 1e-14);
}

TEST(Ccf, ZeroVarianceSegmentIsUndefined) {
  const std::vector<double> x{1, 1, 1, 1, 1, 2}, y{0, 1, 2, 3, 4, 5};
  const CcfResult r = lagged_ccf(x, y, 1);
  EXPECT_FALSE(r.at(1).has_value());  // x_0..x_4 all equal
  EXPECT_TRUE(r.at(0).has_value());
}

TEST(Ccf, WhiteNoiseBandCoverage) {
  Rng rng = make_rng(1000);
  int inside = 0;
  const int reps = 1000;
  for (int i = 0; i < reps; ++i) {
    const auto x = leadlag::testing::gaussian_noise(200, rng), y = leadlag::testing::gaussian_noise(200, rng);
    const CcfResult r = lagged_ccf(x, y, 0);
    if (std::abs(*r.at(0)) <= r.band) ++inside;
  }
  EXPECT_NEAR(static_cast<double>(inside) / reps, 0.95, 0.02);
}

TEST(Ccm, SelfMapIsNearlyPerfect) {
  const auto [x, y] = coupled_logistic(100, 1);
  CcmOptions opt;
  opt.E = 2;
  opt.surrogates = 0;
  const SkillCurve c = ccm(x, x, opt);
  EXPECT_GE(c.terminal_rho, 0.99);
}

TEST(Ccm, DrivenDirectionShowsConvergentSkill) {
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto [x, y] = coupled_logistic(400, seed);
    CcmOptions opt;
    opt.E = 3;
    opt.seed = seed;
    const SkillCurve c = ccm(x, y, opt);
    EXPECT_GT(c.rho_mean.back(), c.rho_mean.front() + 0.1) << "seed " << seed;
    EXPECT_LT(c.p_value, 0.05) << "seed " << seed;
    EXPECT_FALSE(c.no_skill);
    for (std::size_t i = 1; i < c.library_sizes.size(); ++i) EXPECT_GT(c.library_sizes[i], c.library_sizes[i - 1]);
    for (double r : c.rho_mean) {
      EXPECT_GE(r, -1.0);
      EXPECT_LE(r, 1.0);
    }
  }
}

TEST(Ccm, IndependentNoiseHasNoSignificantSkill) {
  int insignificant = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto x = uniform_noise(200, seed, 0), y = uniform_noise(200, seed, 1);
    CcmOptions opt;
    opt.seed = seed;
    opt.resamples = 5;
    const SkillCurve c = ccm(x, y, opt);
    EXPECT_LT(std::abs(c.terminal_rho), 0.3);
    if (c.p_value > 0.05) ++insignificant;
  }
  EXPECT_GE(insignificant, 8);
}

TEST(Ccm, ResampleSeedBarelyMovesTerminalSkill) {
  const auto [x, y] = coupled_logistic(400, 5);
  CcmOptions a, b;
  a.surrogates = b.surrogates = 0;
  a.seed = 1;
  b.seed = 2;
  const SkillCurve ca = ccm(x, y, a), cb = ccm(x, y, b);
  EXPECT_NEAR(ca.rho_mean.back(), cb.rho_mean.back(), 0.05);
}

TEST(Ccm, DegenerateEmbeddingIsUnpredictable) {
  const std::vector<double> y(30, 0.5);
  const auto x = uniform_noise(30, 1, 0);
  CcmOptions opt;
  opt.E = 2;
  opt.surrogates = 10;
  const SkillCurve c = ccm(x, y, opt);
  EXPECT_TRUE(c.unpredictable);
  EXPECT_TRUE(c.no_skill);
}

TEST(Ccm, ThreadCountDoesNotChangeResults) {
  const auto [x, y] = coupled_logistic(150, 2);
  CcmOptions one, many;
  one.surrogates = many.surrogates = 40;
  many.threads = 4;
  const SkillCurve a = ccm(x, y, one), b = ccm(x, y, many);
  EXPECT_EQ(a.rho_mean, b.rho_mean);
  EXPECT_EQ(a.p_value, b.p_value);
}

TEST(Ccm, RejectsBadOptions) {
  const auto x = uniform_noise(20, 1, 0);
  CcmOptions opt;
  opt.library_sizes = {5, 5};
  EXPECT_THROW(ccm(x, x, opt), ValidationError);
  opt.library_sizes = {};
  opt.E = 0;
  EXPECT_THROW(ccm(x, x, opt), ValidationError);
  const std::vector<double> shorter(5, 0.1);
  EXPECT_THROW(ccm(x, shorter, CcmOptions{}), ValidationError);
}
