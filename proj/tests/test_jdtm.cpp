#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "leadlag/evaluation.hpp"
#include "leadlag/jdtm.hpp"
#include "leadlag/synthgen.hpp"

using namespace leadlag;

namespace {

SyntheticData small_data(std::uint64_t seed, int lag = 2) {
  GenConfig g;
  g.T = 5;
  g.V = 40;
  g.K = 2;
  g.J = 1;
  g.H = 1;
  g.lag = lag;
  g.docs_per_slice = {6, 4};
  g.words_per_doc = {20, 10};
  g.seed = seed;
  return generate(g);
}

ModelConfig small_config(int lag = 2) {
  ModelConfig c;
  c.K = 2;
  c.J = 1;
  c.H = 1;
  c.lag = lag;
  c.sigma2_shared = c.sigma2_lead = c.sigma2_lag = 1.0;
  c.sweep_max = 15;
  return c;
}

}  // namespace

TEST(Init, UniformCorpusGivesEqualObservationsWithoutJitter) {
  CorpusPair corpus(2, Vocabulary::synthetic(4));
  for (int t = 1; t <= 2; ++t) corpus.add(Document::make("d" + std::to_string(t), t, Side::lead, {{0, 2}, {1, 2}, {2, 2}, {3, 2}}));
  ModelConfig cfg = small_config(1);
  cfg.init_jitter = 0.0;
  const ModelState s = init_state(corpus, cfg);
  for (const auto& c : s.chains)
    for (double a : c.alpha_hat) EXPECT_EQ(a, s.chains[0].alpha_hat[0]);

  cfg.init_jitter = 0.1;
  const ModelState j = init_state(corpus, cfg);
  for (const auto& c : j.chains)
    for (double a : c.alpha_hat) EXPECT_NEAR(a, s.chains[0].alpha_hat[0], 0.6);
}

TEST(Init, SameSeedSameState) {
  const SyntheticData data = small_data(3);
  const ModelState a = init_state(data.corpus, small_config()), b = init_state(data.corpus, small_config());
  ASSERT_EQ(a.chains.size(), b.chains.size());
  for (std::size_t c = 0; c < a.chains.size(); ++c) EXPECT_EQ(a.chains[c].alpha_hat, b.chains[c].alpha_hat);
  ModelConfig other = small_config();
  other.init_seed = 2;
  EXPECT_NE(init_state(data.corpus, other).chains[0].alpha_hat, a.chains[0].alpha_hat);
}

TEST(Init, RejectsEmptyVocabularyAndMissingTopics) {
  CorpusPair empty(1, Vocabulary{});
  EXPECT_THROW(init_state(empty, small_config()), ValidationError);
  const SyntheticData data = small_data(1);
  ModelConfig cfg = small_config();
  cfg.K = 0;
  cfg.H = 0;
  EXPECT_THROW(init_state(data.corpus, cfg), ValidationError);
  cfg = small_config();
  cfg.sigma2_lag = -1.0;
  EXPECT_THROW(init_state(data.corpus, cfg), ValidationError);
}

TEST(Elbo, EmptyCorpusHasOnlyChainTerms) {
  CorpusPair corpus(3, Vocabulary::synthetic(5));
  const ModelState s = init_state(corpus, small_config(1));
  const ElboParts parts = compute_elbo_parts(s);
  EXPECT_EQ(parts.documents, 0.0);
  double expected = 0.0;
  for (const auto& c : s.chains) {
    const ChainBound b = chain_elbo_and_gradient(c, ChainCounts(c.length, c.vocab));
    EXPECT_EQ(b.likelihood, 0.0);
    expected += b.drift + b.constant;
  }
  EXPECT_NEAR(parts.chains, expected, 1e-12 * std::abs(expected));
}

TEST(Elbo, InvariantUnderPermutingTopicsWithinAType) {
  const SyntheticData data = small_data(5);
  ModelConfig cfg = small_config();
  cfg.K = 3;
  ModelState s = init_state(data.corpus, cfg);
  FitOptions opt;
  document_phase(s, opt);  // non-uniform posteriors
  const double before = compute_elbo(s);

  // swap shared topics 0 and 2 in the chains and in every document posterior
  std::swap(s.chains[0], s.chains[2]);
  for (std::size_t d = 0; d < s.docs.size(); ++d) {
    auto& p = s.posteriors[d];
    const auto K = static_cast<std::size_t>(p.topics);
    std::swap(p.tau[0], p.tau[2]);
    for (std::size_t i = 0; i < s.docs[d]->counts.size(); ++i) std::swap(p.lambda[i * K], p.lambda[i * K + 2]);
  }
  EXPECT_NEAR(compute_elbo(s), before, 1e-10 * std::abs(before));
}

TEST(Fit, ElboIsMonotone) {
  for (std::uint64_t seed : {1, 2}) {
    const SyntheticData data = small_data(seed);
    ModelConfig cfg = small_config();
    cfg.elbo_rel_tol = 0.0;
    const FittedModel m = fit(data.corpus, cfg);
    ASSERT_EQ(m.elbo_trace.size(), static_cast<std::size_t>(cfg.sweep_max));
    for (std::size_t i = 1; i < m.elbo_trace.size(); ++i)
      EXPECT_GE(m.elbo_trace[i], m.elbo_trace[i - 1] - 1e-6 * std::abs(m.elbo_trace[i - 1])) << "sweep " << i + 1;
  }
}

TEST(Fit, DeterministicAcrossRunsAndThreadCounts) {
  const SyntheticData data = small_data(9);
  const ModelConfig cfg = small_config();
  const FittedModel a = fit(data.corpus, cfg);
  const FittedModel b = fit(data.corpus, cfg);
  FitOptions threaded;
  threaded.threads = 3;
  threaded.block_size = 7;
  const FittedModel c = fit(data.corpus, cfg, threaded);
  EXPECT_EQ(a.elbo_trace, b.elbo_trace);
  EXPECT_EQ(a.elbo_trace, c.elbo_trace);
  for (std::size_t k = 0; k < a.chains.size(); ++k) {
    EXPECT_EQ(a.chains[k].alpha_hat, b.chains[k].alpha_hat);
    EXPECT_EQ(a.chains[k].alpha_hat, c.chains[k].alpha_hat);
  }
}

TEST(Fit, LaggedDocumentsReadSharedTopicsAtEarlierTime) {
  const int lag = 2;
  const SyntheticData data = small_data(4, lag);
  ModelConfig cfg = small_config(lag);
  cfg.sweep_max = 2;
  std::size_t reads = 0;
  bool all_ok = true;
  const AccessProbe probe = [&](const Document& d, int slot, const TopicAccess& a) {
    ++reads;
    const bool shared = slot < cfg.K;
    const int expected_time = shared && d.side == Side::lag ? d.slice - lag : d.slice;
    int expected_chain = slot;
    if (!shared) expected_chain = d.side == Side::lead ? slot : cfg.J + slot;
    if (a.chain_time != expected_time || a.chain != expected_chain) all_ok = false;
  };
  FitOptions opt;
  opt.probe = &probe;
  fit(data.corpus, cfg, opt);
  EXPECT_TRUE(all_ok);
  std::size_t expected_reads = 0;
  data.corpus.for_each_document([&](const Document& d) { expected_reads += static_cast<std::size_t>(cfg.topics(d.side)); });
  EXPECT_EQ(reads, 2 * expected_reads);
}

TEST(Fit, SharedTopicsPoolBothCorpora) {
  // with K shared topics only, lag slices t feed chain time t - l
  const int lag = 1;
  const SyntheticData data = small_data(6, lag);
  ModelConfig cfg = small_config(lag);
  cfg.J = 0;
  cfg.H = 0;
  ModelState s = init_state(data.corpus, cfg);
  const CountTensor counts = document_phase(s, FitOptions{});
  double lead_tokens_t1 = 0.0, lag_tokens_t2 = 0.0;
  for (const auto& d : data.corpus.slice(Side::lead, 1)) lead_tokens_t1 += d.total;
  for (const auto& d : data.corpus.slice(Side::lag, 2)) lag_tokens_t2 += d.total;
  double row_total = 0.0;
  for (int k = 0; k < cfg.K; ++k) row_total += counts[static_cast<std::size_t>(k)].totals[static_cast<std::size_t>(s.chains[0].row(1))];
  EXPECT_NEAR(row_total, lead_tokens_t1 + lag_tokens_t2, 1e-9 * row_total);
}

TEST(Fit, SeparateDtmOnOneCorpus) {
  const SyntheticData data = small_data(8);
  CorpusPair lead_only = data.corpus.empty_like();
  for (int t = 1; t <= data.corpus.horizon(); ++t)
    for (const auto& d : data.corpus.slice(Side::lead, t)) lead_only.add(d);
  ModelConfig cfg = small_config();
  cfg.K = 0;
  cfg.J = 3;
  cfg.H = 0;
  cfg.lag = 0;
  const FittedModel m = fit(lead_only, cfg);
  EXPECT_EQ(m.chains.size(), 3u);
  for (const auto& c : m.chains) EXPECT_EQ(c.type, TopicType::lead_specific);
  EXPECT_TRUE(std::isfinite(m.elbo_trace.back()));
}
