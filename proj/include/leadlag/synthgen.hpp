#pragma once

// Synthetic corpus pairs drawn from the jointly dynamic generative process.
//
// plain:    topics are Gaussian random walks of natural parameters over the
//           vocabulary; word distribution = softmax(chain slice).
// embedded: topics are Gaussian random walks in an L-dimensional embedding
//           space; word distribution = softmax(rho^T alpha) with unit-norm
//           word embeddings rho (L x V).
//
// Leading documents at slice t draw shared topics at t; lagged documents at t
// draw shared topics at t - l, so shared chains span 1-l..T.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "leadlag/chain.hpp"
#include "leadlag/corpus.hpp"
#include "leadlag/error.hpp"
#include "leadlag/numeric.hpp"
#include "leadlag/random.hpp"

namespace leadlag {

enum class Scenario { plain, embedded };

/// Po(mean) + offset.
struct CountLaw {
  double mean = 100.0;
  int offset = 50;

  int draw(Rng& rng) const {
    if (mean <= 0.0) return offset;
    std::poisson_distribution<int> po(mean);
    return po(rng) + offset;
  }
};

struct GenConfig {
  Scenario scenario = Scenario::plain;
  int T = 10;
  int V = 1000;
  int K = 9;
  int J = 1;
  int H = 1;
  int lag = 3;
  CountLaw docs_per_slice{100.0, 50};
  CountLaw words_per_doc{50.0, 50};
  double sigma2_shared = 1.0;
  double sigma2_lead = 1.0;
  double sigma2_lag = 1.0;
  double proportion_drift = 1.0;     // eta_t ~ N(eta_{t-1}, drift)
  double proportion_variance = 1.0;  // theta ~ LN(eta_t, variance)
  int embedding_dim = 50;
  double js_threshold = 0.2;
  int js_max_resamples = 1000;
  std::uint64_t seed = 1;

  int topics(Side side) const { return K + (side == Side::lead ? J : H); }

  void validate() const {
    if (T < 1) throw ValidationError("T must be at least 1");
    if (V < 1) throw ValidationError("V must be at least 1");
    if (K < 0 || J < 0 || H < 0) throw ValidationError("topic counts must be non-negative");
    if (K + J < 1 || K + H < 1) throw ValidationError("need K+J >= 1 and K+H >= 1");
    if (lag < 0) throw ValidationError("lag must be non-negative");
    for (double v : {sigma2_shared, sigma2_lead, sigma2_lag, proportion_drift, proportion_variance})
      if (!(v > 0.0)) throw ValidationError("variances must be positive");
    if (docs_per_slice.offset < 0 || words_per_doc.offset < 0 || docs_per_slice.mean < 0 ||
        words_per_doc.mean < 0)
      throw ValidationError("count laws must be non-negative");
    if (words_per_doc.mean <= 0.0 && words_per_doc.offset < 1)
      throw ValidationError("documents must have at least one word");
    if (scenario == Scenario::embedded && embedding_dim < 2)
      throw ValidationError("embedding dimension L must be at least 2");
  }
};

/// One true topic trajectory; values row-major [row][dim], row r is time t_start + r.
struct TruthChain {
  TopicType type = TopicType::shared;
  int index = 0;
  int t_start = 1;
  int length = 0;
  int dim = 0;
  std::vector<double> values;

  std::span<const double> slice(int t) const {
    return std::span<const double>(values).subspan(static_cast<std::size_t>(t - t_start) * dim,
                                                   static_cast<std::size_t>(dim));
  }
  std::span<double> slice(int t) {
    return std::span<double>(values).subspan(static_cast<std::size_t>(t - t_start) * dim,
                                             static_cast<std::size_t>(dim));
  }
};

struct DocumentTruth {
  std::string id;
  std::vector<double> proportions;
};

struct GroundTruth {
  Scenario scenario = Scenario::plain;
  int V = 0;
  int K = 0, J = 0, H = 0, lag = 0, T = 0;
  std::vector<TruthChain> chains;              // shared, lead-specific, lag-specific
  std::vector<std::vector<double>> eta;        // t = 0..T, dim K+J
  std::vector<std::vector<double>> kappa;      // t = 0..T, dim K+H
  std::vector<DocumentTruth> documents;
  int embedding_dim = 0;
  std::vector<double> rho;                     // embedded: L x V row-major [l][v]

  const TruthChain& chain(Side side, int slot) const {
    if (slot < K || side == Side::lead) return chains[static_cast<std::size_t>(slot)];
    return chains[static_cast<std::size_t>(J + slot)];
  }

  /// Time at which a slot of a document at slice t reads its chain.
  int chain_time(Side side, int slot, int t) const { return (slot < K && side == Side::lag) ? t - lag : t; }

  std::vector<double> word_distribution(const TruthChain& c, int t) const;
};

/// softmax(rho^T alpha) for a topic embedding alpha (length L).
inline std::vector<double> embedding_word_distribution(std::span<const double> rho, int L, int V,
                                                       std::span<const double> alpha) {
  std::vector<double> logits(static_cast<std::size_t>(V), 0.0);
  for (int l = 0; l < L; ++l) {
    const double a = alpha[static_cast<std::size_t>(l)];
    const double* row = &rho[static_cast<std::size_t>(l) * V];
    for (int v = 0; v < V; ++v) logits[static_cast<std::size_t>(v)] += a * row[v];
  }
  numeric::softmax_inplace(logits);
  return logits;
}

inline std::vector<double> GroundTruth::word_distribution(const TruthChain& c, int t) const {
  if (scenario == Scenario::embedded) return embedding_word_distribution(rho, embedding_dim, V, c.slice(t));
  return numeric::softmax(c.slice(t));
}

namespace detail {

inline void random_walk(TruthChain& chain, double sigma2, Rng& rng) {
  std::normal_distribution<double> stdnorm(0.0, 1.0);
  const double sd = std::sqrt(sigma2);
  for (double& x : chain.slice(chain.t_start)) x = stdnorm(rng);
  for (int t = chain.t_start + 1; t < chain.t_start + chain.length; ++t) {
    auto prev = chain.slice(t - 1);
    auto cur = chain.slice(t);
    for (std::size_t i = 0; i < cur.size(); ++i) cur[i] = prev[i] + sd * stdnorm(rng);
  }
}

inline std::vector<std::vector<double>> proportion_means(int dim, int T, double drift, Rng& rng) {
  std::normal_distribution<double> stdnorm(0.0, 1.0);
  std::vector<std::vector<double>> out(static_cast<std::size_t>(T + 1), std::vector<double>(static_cast<std::size_t>(dim)));
  for (auto& x : out[0]) x = stdnorm(rng);
  const double sd = std::sqrt(drift);
  for (int t = 1; t <= T; ++t)
    for (int i = 0; i < dim; ++i)
      out[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)] =
          out[static_cast<std::size_t>(t - 1)][static_cast<std::size_t>(i)] + sd * stdnorm(rng);
  return out;
}

inline TruthChain make_truth_chain(TopicType type, int index, int t_start, int length, int dim) {
  TruthChain c{type, index, t_start, length, dim, {}};
  c.values.assign(static_cast<std::size_t>(length) * static_cast<std::size_t>(dim), 0.0);
  return c;
}

enum : std::uint64_t { kTagChain = 0xc4a1, kTagProportion = 0x9e0, kTagSlice = 0x511ce, kTagEmbedding = 0xe3b };

}  // namespace detail

/// Draws documents for a fully specified truth (chains and proportion means).
/// Each (side, t) slice uses its own derived stream, so slices are independent
/// of generation order.
inline CorpusPair sample_corpus(const GenConfig& cfg, GroundTruth& truth) {
  CorpusPair corpus(cfg.T, Vocabulary::synthetic(cfg.V));
  truth.documents.clear();
  const double prop_sd = std::sqrt(cfg.proportion_variance);
  for (Side side : {Side::lead, Side::lag}) {
    const int K = cfg.topics(side);
    const auto& means = side == Side::lead ? truth.eta : truth.kappa;
    for (int t = 1; t <= cfg.T; ++t) {
      Rng rng = make_rng(cfg.seed, {detail::kTagSlice, static_cast<std::uint64_t>(side), static_cast<std::uint64_t>(t)});
      std::vector<std::discrete_distribution<int>> word_dists;
      word_dists.reserve(static_cast<std::size_t>(K));
      for (int slot = 0; slot < K; ++slot) {
        const TruthChain& chain = truth.chain(side, slot);
        const auto p = truth.word_distribution(chain, truth.chain_time(side, slot, t));
        word_dists.emplace_back(p.begin(), p.end());
      }
      const int n_docs = cfg.docs_per_slice.draw(rng);
      std::normal_distribution<double> stdnorm(0.0, 1.0);
      std::vector<int> tokens;
      for (int d = 0; d < n_docs; ++d) {
        std::vector<double> theta(static_cast<std::size_t>(K));
        for (int k = 0; k < K; ++k)
          theta[static_cast<std::size_t>(k)] =
              means[static_cast<std::size_t>(t)][static_cast<std::size_t>(k)] + prop_sd * stdnorm(rng);
        numeric::softmax_inplace(theta);  // log-normal draw normalised to the simplex
        std::discrete_distribution<int> topic_dist(theta.begin(), theta.end());
        const int n_words = std::max(1, cfg.words_per_doc.draw(rng));
        tokens.clear();
        for (int n = 0; n < n_words; ++n) tokens.push_back(word_dists[static_cast<std::size_t>(topic_dist(rng))](rng));
        std::sort(tokens.begin(), tokens.end());
        std::vector<WordCount> counts;
        for (int w : tokens) {
          if (!counts.empty() && counts.back().word == w) ++counts.back().count;
          else counts.push_back({w, 1});
        }
        char id[64];
        std::snprintf(id, sizeof id, "%s-t%03d-d%05d", side == Side::lead ? "lead" : "lag", t, d);
        corpus.add(Document::make(id, t, side, std::move(counts)));
        truth.documents.push_back({id, std::move(theta)});
      }
    }
  }
  return corpus;
}

inline GroundTruth draw_truth_skeleton(const GenConfig& cfg, int dim) {
  GroundTruth truth;
  truth.scenario = cfg.scenario;
  truth.V = cfg.V;
  truth.K = cfg.K;
  truth.J = cfg.J;
  truth.H = cfg.H;
  truth.lag = cfg.lag;
  truth.T = cfg.T;
  for (int k = 0; k < cfg.K; ++k)
    truth.chains.push_back(detail::make_truth_chain(TopicType::shared, k, 1 - cfg.lag, cfg.T + cfg.lag, dim));
  for (int j = 0; j < cfg.J; ++j)
    truth.chains.push_back(detail::make_truth_chain(TopicType::lead_specific, j, 1, cfg.T, dim));
  for (int h = 0; h < cfg.H; ++h)
    truth.chains.push_back(detail::make_truth_chain(TopicType::lag_specific, h, 1, cfg.T, dim));
  Rng lead_rng = make_rng(cfg.seed, {detail::kTagProportion, 0});
  Rng lag_rng = make_rng(cfg.seed, {detail::kTagProportion, 1});
  truth.eta = detail::proportion_means(cfg.K + cfg.J, cfg.T, cfg.proportion_drift, lead_rng);
  truth.kappa = detail::proportion_means(cfg.K + cfg.H, cfg.T, cfg.proportion_drift, lag_rng);
  return truth;
}

inline double chain_sigma2(const GenConfig& cfg, TopicType type) {
  switch (type) {
    case TopicType::shared: return cfg.sigma2_shared;
    case TopicType::lead_specific: return cfg.sigma2_lead;
    case TopicType::lag_specific: return cfg.sigma2_lag;
  }
  return cfg.sigma2_shared;
}

struct SyntheticData {
  CorpusPair corpus;
  GroundTruth truth;
};

inline SyntheticData generate_scenario1(const GenConfig& cfg) {
  cfg.validate();
  if (cfg.scenario != Scenario::plain) throw ValidationError("scenario 1 requires the plain scenario");
  GroundTruth truth = draw_truth_skeleton(cfg, cfg.V);
  for (std::size_t c = 0; c < truth.chains.size(); ++c) {
    Rng rng = make_rng(cfg.seed, {detail::kTagChain, c});
    detail::random_walk(truth.chains[c], chain_sigma2(cfg, truth.chains[c].type), rng);
  }
  CorpusPair corpus = sample_corpus(cfg, truth);
  return {std::move(corpus), std::move(truth)};
}

inline SyntheticData generate_scenario2(const GenConfig& cfg) {
  cfg.validate();
  if (cfg.scenario != Scenario::embedded) throw ValidationError("scenario 2 requires the embedded scenario");
  const int L = cfg.embedding_dim;
  const int V = cfg.V;
  GroundTruth truth = draw_truth_skeleton(cfg, L);
  truth.embedding_dim = L;

  {
    Rng rng = make_rng(cfg.seed, {detail::kTagEmbedding});
    std::normal_distribution<double> stdnorm(0.0, 1.0);
    truth.rho.resize(static_cast<std::size_t>(L) * V);
    for (double& x : truth.rho) x = stdnorm(rng);
    for (int v = 0; v < V; ++v) {
      double norm = 0.0;
      for (int l = 0; l < L; ++l) norm += truth.rho[static_cast<std::size_t>(l) * V + v] * truth.rho[static_cast<std::size_t>(l) * V + v];
      norm = std::sqrt(norm);
      for (int l = 0; l < L; ++l) truth.rho[static_cast<std::size_t>(l) * V + v] /= norm;
    }
  }

  for (std::size_t c = 0; c < truth.chains.size(); ++c) {
    Rng rng = make_rng(cfg.seed, {detail::kTagChain, c});
    detail::random_walk(truth.chains[c], chain_sigma2(cfg, truth.chains[c].type), rng);
  }

  // Lag-specific topics are redrawn until their initial word distribution is
  // at least js_threshold away from every lead-specific topic.
  std::vector<std::vector<double>> lead_initial;
  for (int j = 0; j < cfg.J; ++j)
    lead_initial.push_back(truth.word_distribution(truth.chains[static_cast<std::size_t>(cfg.K + j)], 1));
  for (int h = 0; h < cfg.H; ++h) {
    const auto c = static_cast<std::size_t>(cfg.K + cfg.J + h);
    Rng rng = make_rng(cfg.seed, {detail::kTagChain, c, 0x5c2ee1});
    int attempts = 0;
    for (;;) {
      const auto p = truth.word_distribution(truth.chains[c], 1);
      bool separated = true;
      for (const auto& q : lead_initial)
        if (numeric::js_divergence(p, q) < cfg.js_threshold) {
          separated = false;
          break;
        }
      if (separated) break;
      if (++attempts > cfg.js_max_resamples)
        throw Error("could not separate specific topics (lag-specific topic " + std::to_string(h) + " after " +
                    std::to_string(cfg.js_max_resamples) + " resamples)");
      detail::random_walk(truth.chains[c], cfg.sigma2_lag, rng);
    }
  }

  CorpusPair corpus = sample_corpus(cfg, truth);
  return {std::move(corpus), std::move(truth)};
}

inline SyntheticData generate(const GenConfig& cfg) {
  return cfg.scenario == Scenario::plain ? generate_scenario1(cfg) : generate_scenario2(cfg);
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::ordered_json to_json(const GenConfig& cfg) {
  nlohmann::ordered_json j;
  j["scenario"] = cfg.scenario == Scenario::plain ? 1 : 2;
  j["T"] = cfg.T;
  j["V"] = cfg.V;
  j["K"] = cfg.K;
  j["J"] = cfg.J;
  j["H"] = cfg.H;
  j["lag"] = cfg.lag;
  j["docs_per_slice"] = {{"poisson_mean", cfg.docs_per_slice.mean}, {"offset", cfg.docs_per_slice.offset}};
  j["words_per_doc"] = {{"poisson_mean", cfg.words_per_doc.mean}, {"offset", cfg.words_per_doc.offset}};
  j["sigma2_shared"] = cfg.sigma2_shared;
  j["sigma2_lead"] = cfg.sigma2_lead;
  j["sigma2_lag"] = cfg.sigma2_lag;
  j["proportion_drift"] = cfg.proportion_drift;
  j["proportion_variance"] = cfg.proportion_variance;
  j["embedding_dim"] = cfg.embedding_dim;
  j["js_threshold"] = cfg.js_threshold;
  j["js_max_resamples"] = cfg.js_max_resamples;
  j["seed"] = cfg.seed;
  return j;
}

inline nlohmann::ordered_json to_json(const GroundTruth& truth) {
  nlohmann::ordered_json j;
  j["scenario"] = truth.scenario == Scenario::plain ? "plain" : "embedded";
  j["V"] = truth.V;
  j["K"] = truth.K;
  j["J"] = truth.J;
  j["H"] = truth.H;
  j["lag"] = truth.lag;
  j["T"] = truth.T;
  j["parameter_space"] = truth.scenario == Scenario::plain ? "vocabulary" : "embedding";
  auto chains = nlohmann::ordered_json::array();
  for (const auto& c : truth.chains) {
    nlohmann::ordered_json cj;
    cj["type"] = std::string(to_string(c.type));
    cj["k"] = c.index;
    cj["t_start"] = c.t_start;
    auto rows = nlohmann::ordered_json::array();
    for (int t = c.t_start; t < c.t_start + c.length; ++t) {
      auto s = c.slice(t);
      rows.push_back(std::vector<double>(s.begin(), s.end()));
    }
    cj["values"] = std::move(rows);
    chains.push_back(std::move(cj));
  }
  j["chains"] = std::move(chains);
  j["eta"] = truth.eta;
  j["kappa"] = truth.kappa;
  auto docs = nlohmann::ordered_json::array();
  for (const auto& d : truth.documents) docs.push_back({{"id", d.id}, {"proportions", d.proportions}});
  j["documents"] = std::move(docs);
  if (truth.scenario == Scenario::embedded) {
    j["embedding_dim"] = truth.embedding_dim;
    auto rho = nlohmann::ordered_json::array();
    for (int l = 0; l < truth.embedding_dim; ++l)
      rho.push_back(std::vector<double>(truth.rho.begin() + static_cast<std::ptrdiff_t>(l) * truth.V,
                                        truth.rho.begin() + static_cast<std::ptrdiff_t>(l + 1) * truth.V));
    j["rho"] = std::move(rho);
  }
  return j;
}

}  // namespace leadlag
