#pragma once

// Coordinate-ascent variational inference for the jointly dynamic topic
// model. Documents of the leading corpus mix K shared and J lead-specific
// topics; documents of the lagged corpus mix the same K shared topics, read
// l slices earlier, and H lag-specific topics.
//
// Topic slots inside a document: slots 0..K-1 are the shared topics, the
// remaining slots are the side's specific topics. Chains are stored shared
// first, then lead-specific, then lag-specific. Shared chains cover chain
// time 1-l..T so that a lagged document at slice t can read t-l.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "leadlag/chain.hpp"
#include "leadlag/corpus.hpp"
#include "leadlag/error.hpp"
#include "leadlag/numeric.hpp"
#include "leadlag/parallel.hpp"
#include "leadlag/random.hpp"

namespace leadlag {

struct ModelConfig {
  int K = 1;  // shared topics
  int J = 1;  // lead-specific topics
  int H = 1;  // lag-specific topics
  int lag = 1;

  double sigma2_shared = 0.005;
  double sigma2_lead = 0.005;
  double sigma2_lag = 0.005;
  /// Variational observation variance as a multiple of the chain's drift variance.
  double obs_variance_ratio = 10.0;

  double eta = 0.1;    // Dirichlet prior, leading documents
  double kappa = 0.1;  // Dirichlet prior, lagged documents

  // Generative-model variances of the proportion process. Carried for parity
  // with the generator; the document updates use the Dirichlet priors above.
  double delta2_lead = 1.0;
  double delta2_lag = 1.0;
  double varpi2_lead = 1.0;
  double varpi2_lag = 1.0;

  int cg_max_iter = 15;
  double cg_tol = 1e-4;
  int doc_max_iter = 100;
  double doc_tol = 1e-5;
  int sweep_max = 100;
  double elbo_rel_tol = 1e-5;
  std::uint64_t init_seed = 1;
  double init_jitter = 0.1;

  int topics(Side side) const { return K + (side == Side::lead ? J : H); }
  double prior(Side side) const { return side == Side::lead ? eta : kappa; }
  int num_chains() const { return K + J + H; }

  double sigma2(TopicType type) const {
    switch (type) {
      case TopicType::shared: return sigma2_shared;
      case TopicType::lead_specific: return sigma2_lead;
      case TopicType::lag_specific: return sigma2_lag;
    }
    return sigma2_shared;
  }

  void validate() const {
    if (K < 0 || J < 0 || H < 0) throw ValidationError("topic counts must be non-negative");
    if (K + J + H < 1) throw ValidationError("model needs at least one topic");
    if (lag < 0) throw ValidationError("lag must be non-negative");
    for (double v : {sigma2_shared, sigma2_lead, sigma2_lag, obs_variance_ratio, delta2_lead, delta2_lag,
                     varpi2_lead, varpi2_lag})
      if (!(v > 0.0)) throw ValidationError("variances must be positive");
    if (!(eta > 0.0) || !(kappa > 0.0)) throw ValidationError("Dirichlet priors eta, kappa must be positive");
    if (cg_max_iter < 1 || doc_max_iter < 1 || sweep_max < 1)
      throw ValidationError("iteration limits must be at least 1");
    if (!(cg_tol >= 0.0) || !(doc_tol >= 0.0) || !(elbo_rel_tol >= 0.0))
      throw ValidationError("tolerances must be non-negative");
  }

  /// Rejects a corpus side that has documents but no topics to explain them.
  void validate_for(const CorpusPair& corpus) const {
    validate();
    if (corpus.vocab_size() < 1) throw ValidationError("vocabulary is empty (V = 0)");
    if (corpus.horizon() < 1) throw ValidationError("corpus has no time slices");
    for (Side side : {Side::lead, Side::lag})
      if (corpus.num_documents(side) > 0 && topics(side) < 1)
        throw ValidationError(std::string(to_string(side)) + " corpus has documents but K+" +
                              (side == Side::lead ? "J" : "H") + " = 0");
  }

  CgOptions cg_options() const {
    CgOptions o;
    o.max_iter = cg_max_iter;
    o.rel_tol = cg_tol;
    return o;
  }
};

/// Where a topic slot of a document at slice t reads its word distribution.
struct TopicAccess {
  int chain = 0;       // index into the chain list
  int chain_time = 0;  // time index on the chain
};

inline int chain_index(const ModelConfig& cfg, Side side, int slot) {
  if (slot < cfg.K) return slot;
  return side == Side::lead ? cfg.K + (slot - cfg.K) : cfg.K + cfg.J + (slot - cfg.K);
}

inline TopicAccess resolve_topic(const ModelConfig& cfg, Side side, int slot, int t) {
  const bool shared = slot < cfg.K;
  return {chain_index(cfg, side, slot), (shared && side == Side::lag) ? t - cfg.lag : t};
}

/// Observer for topic reads during document updates (test instrumentation).
using AccessProbe = std::function<void(const Document&, int slot, const TopicAccess&)>;

/// Builds chains with their time spans; alpha_hat is left at zero.
inline std::vector<TopicChain> make_chains(const ModelConfig& cfg, int horizon, int vocab) {
  std::vector<TopicChain> chains;
  chains.reserve(static_cast<std::size_t>(cfg.num_chains()));
  const auto obs = [&](TopicType t) { return cfg.obs_variance_ratio * cfg.sigma2(t); };
  for (int k = 0; k < cfg.K; ++k)
    chains.emplace_back(TopicType::shared, k, 1 - cfg.lag, horizon + cfg.lag, vocab, cfg.sigma2_shared,
                        obs(TopicType::shared));
  for (int j = 0; j < cfg.J; ++j)
    chains.emplace_back(TopicType::lead_specific, j, 1, horizon, vocab, cfg.sigma2_lead,
                        obs(TopicType::lead_specific));
  for (int h = 0; h < cfg.H; ++h)
    chains.emplace_back(TopicType::lag_specific, h, 1, horizon, vocab, cfg.sigma2_lag,
                        obs(TopicType::lag_specific));
  return chains;
}

// ---------------------------------------------------------------------------
// Document level

/// Variational posterior of one document. lambda holds one row per distinct
/// word of the document (tokens of the same word share their assignment
/// distribution), row-major [row][slot].
struct DocumentPosterior {
  std::vector<double> tau;
  std::vector<double> lambda;
  int topics = 0;
  int iterations = 0;
  /// Document terms of the bound that do not involve the chains:
  /// E[log p(theta)] + E[log p(z|theta)] - E[log q(theta)] - E[log q(z)].
  double local_elbo = 0.0;

  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(lambda).subspan(i * static_cast<std::size_t>(topics),
                                                   static_cast<std::size_t>(topics));
  }
};

inline std::vector<double> initial_tau(const Document& doc, const ModelConfig& cfg) {
  const int k = cfg.topics(doc.side);
  return std::vector<double>(static_cast<std::size_t>(k),
                             cfg.prior(doc.side) + static_cast<double>(doc.total) / k);
}

inline double document_local_elbo(const Document& doc, std::span<const double> tau,
                                  std::span<const double> lambda, double prior) {
  const auto K = tau.size();
  double tau_sum = 0.0;
  for (double t : tau) tau_sum += t;
  const double psi_sum = numeric::digamma(tau_sum);
  std::vector<double> e_log_theta(K);
  for (std::size_t k = 0; k < K; ++k) e_log_theta[k] = numeric::digamma(tau[k]) - psi_sum;

  const double Kd = static_cast<double>(K);
  double value = std::lgamma(Kd * prior) - Kd * std::lgamma(prior);
  double q_theta = std::lgamma(tau_sum);
  for (std::size_t k = 0; k < K; ++k) {
    value += (prior - 1.0) * e_log_theta[k];
    q_theta += -std::lgamma(tau[k]) + (tau[k] - 1.0) * e_log_theta[k];
  }
  value -= q_theta;
  for (std::size_t i = 0; i < doc.counts.size(); ++i) {
    const double c = doc.counts[i].count;
    for (std::size_t k = 0; k < K; ++k) {
      const double l = lambda[i * K + k];
      if (l > 0.0) value += c * l * (e_log_theta[k] - std::log(l));
    }
  }
  return value;
}

/// Closed-form coordinate updates of lambda and tau with the chains held fixed.
/// `start_tau` warm-starts the iteration (empty: prior + N/topics).
inline DocumentPosterior update_document(const Document& doc, std::span<const TopicChain> chains,
                                         const ModelConfig& cfg, std::span<const double> start_tau = {},
                                         const AccessProbe* probe = nullptr) {
  const int K = cfg.topics(doc.side);
  if (K < 1)
    throw ValidationError("document '" + doc.id + "': no topics configured for side " +
                          std::string(to_string(doc.side)));
  const std::size_t W = doc.counts.size();
  const auto Kz = static_cast<std::size_t>(K);

  // expected log word probability, m_tilde - log zeta, for every (word, slot)
  std::vector<double> word_term(W * Kz);
  for (int slot = 0; slot < K; ++slot) {
    const TopicAccess access = resolve_topic(cfg, doc.side, slot, doc.slice);
    if (probe && *probe) (*probe)(doc, slot, access);
    const TopicChain& chain = chains[static_cast<std::size_t>(access.chain)];
    const int r = chain.row(access.chain_time);
    const double log_z = chain.log_zeta(r);
    const auto mean = chain.mean_row(r);
    for (std::size_t i = 0; i < W; ++i) {
      const double v = mean[static_cast<std::size_t>(doc.counts[i].word)] - log_z;
      if (!std::isfinite(v))
        throw NumericError("document '" + doc.id + "', token " + std::to_string(i) + " (word " +
                           std::to_string(doc.counts[i].word) + "): non-finite topic term");
      word_term[i * Kz + static_cast<std::size_t>(slot)] = v;
    }
  }

  DocumentPosterior post;
  post.topics = K;
  post.tau = start_tau.empty() ? initial_tau(doc, cfg) : std::vector<double>(start_tau.begin(), start_tau.end());
  if (post.tau.size() != Kz) throw ValidationError("warm-start tau has the wrong dimension");
  post.lambda.assign(W * Kz, 1.0 / K);
  const double prior = cfg.prior(doc.side);

  std::vector<double> psi(Kz), logits(Kz);
  for (int iter = 1; iter <= cfg.doc_max_iter; ++iter) {
    post.iterations = iter;
    for (std::size_t k = 0; k < Kz; ++k) psi[k] = numeric::digamma(post.tau[k]);
    double max_delta = 0.0;
    std::vector<double> new_tau(Kz, prior);
    for (std::size_t i = 0; i < W; ++i) {
      for (std::size_t k = 0; k < Kz; ++k) logits[k] = word_term[i * Kz + k] + psi[k];
      numeric::softmax_inplace(logits);
      const double c = doc.counts[i].count;
      for (std::size_t k = 0; k < Kz; ++k) {
        double& l = post.lambda[i * Kz + k];
        if (!std::isfinite(logits[k]))
          throw NumericError("document '" + doc.id + "', token " + std::to_string(i) +
                             ": non-finite assignment probability");
        max_delta = std::max(max_delta, std::abs(logits[k] - l));
        l = logits[k];
        new_tau[k] += c * l;
      }
    }
    post.tau.swap(new_tau);
    if (max_delta < cfg.doc_tol) break;
  }
  post.local_elbo = document_local_elbo(doc, post.tau, post.lambda, prior);
  if (!std::isfinite(post.local_elbo))
    throw NumericError("document '" + doc.id + "': non-finite document bound");
  return post;
}

// ---------------------------------------------------------------------------
// Counts

using CountTensor = std::vector<ChainCounts>;

inline CountTensor make_counts(std::span<const TopicChain> chains) {
  CountTensor counts;
  counts.reserve(chains.size());
  for (const auto& c : chains) counts.emplace_back(c.length, c.vocab);
  return counts;
}

/// Adds count(v) * lambda[v][slot] to the chain slice each slot reads.
inline void add_document_counts(CountTensor& counts, std::span<const TopicChain> chains, const Document& doc,
                                const DocumentPosterior& post, const ModelConfig& cfg) {
  const int K = post.topics;
  for (int slot = 0; slot < K; ++slot) {
    const TopicAccess access = resolve_topic(cfg, doc.side, slot, doc.slice);
    const auto c = static_cast<std::size_t>(access.chain);
    const int r = chains[c].row(access.chain_time);
    for (std::size_t i = 0; i < doc.counts.size(); ++i)
      counts[c].add(r, doc.counts[i].word,
                    doc.counts[i].count * post.lambda[i * static_cast<std::size_t>(K) + static_cast<std::size_t>(slot)]);
  }
}

inline CountTensor accumulate_counts(std::span<const Document* const> docs,
                                     std::span<const DocumentPosterior> posteriors,
                                     std::span<const TopicChain> chains, const ModelConfig& cfg) {
  if (docs.size() != posteriors.size()) throw ValidationError("documents and posteriors differ in number");
  CountTensor counts = make_counts(chains);
  for (std::size_t d = 0; d < docs.size(); ++d) add_document_counts(counts, chains, *docs[d], posteriors[d], cfg);
  return counts;
}

// ---------------------------------------------------------------------------
// State, ELBO, fit

struct ModelState {
  ModelConfig config;
  int horizon = 0;
  int vocab = 0;
  std::vector<TopicChain> chains;
  std::vector<const Document*> docs;        // fixed order: lead 1..T, then lag 1..T
  std::vector<DocumentPosterior> posteriors;
};

/// Initial chains (log smoothed corpus frequencies plus seeded jitter) and
/// document posteriors (uniform lambda, tau = prior + N/topics).
inline ModelState init_state(const CorpusPair& corpus, const ModelConfig& cfg) {
  cfg.validate_for(corpus);
  ModelState state;
  state.config = cfg;
  state.horizon = corpus.horizon();
  state.vocab = corpus.vocab_size();
  const int V = state.vocab;

  std::vector<double> freq(static_cast<std::size_t>(V), 0.0);
  double total = 0.0;
  corpus.for_each_document([&](const Document& d) {
    for (const auto& wc : d.counts) freq[static_cast<std::size_t>(wc.word)] += wc.count;
    total += d.total;
  });
  std::vector<double> base(static_cast<std::size_t>(V));
  for (int v = 0; v < V; ++v)
    base[static_cast<std::size_t>(v)] =
        std::log((total > 0.0 ? freq[static_cast<std::size_t>(v)] / total : 0.0) + 1.0 / V);

  state.chains = make_chains(cfg, state.horizon, V);
  for (std::size_t c = 0; c < state.chains.size(); ++c) {
    auto& chain = state.chains[c];
    Rng rng = make_rng(cfg.init_seed, {0x1a17, c});
    std::normal_distribution<double> jitter(0.0, cfg.init_jitter);
    for (int r = 0; r < chain.length; ++r)
      for (int v = 0; v < V; ++v)
        chain.alpha_hat[static_cast<std::size_t>(r) * V + v] = base[static_cast<std::size_t>(v)] + jitter(rng);
    chain.refresh();
  }

  state.docs = corpus.documents();
  state.posteriors.reserve(state.docs.size());
  for (const Document* d : state.docs) {
    DocumentPosterior p;
    p.topics = cfg.topics(d->side);
    p.tau = initial_tau(*d, cfg);
    p.lambda.assign(d->counts.size() * static_cast<std::size_t>(p.topics), 1.0 / p.topics);
    p.local_elbo = document_local_elbo(*d, p.tau, p.lambda, cfg.prior(d->side));
    state.posteriors.push_back(std::move(p));
  }
  return state;
}

struct ElboParts {
  double chains = 0.0;
  double documents = 0.0;
  double total() const { return chains + documents; }
};

inline double chains_elbo(std::span<const TopicChain> chains, const CountTensor& counts) {
  double sum = 0.0;
  for (std::size_t c = 0; c < chains.size(); ++c) {
    const double v = chain_elbo_and_gradient(chains[c], counts[c]).value;
    if (!std::isfinite(v))
      throw NumericError("ELBO term of " + std::string(to_string(chains[c].type)) + " chain " +
                         std::to_string(chains[c].index) + " is not finite");
    sum += v;
  }
  return sum;
}

/// Full bound: chain terms (drift, likelihood via expected counts, entropy)
/// plus document Dirichlet/multinomial terms and entropies.
inline ElboParts compute_elbo_parts(const ModelState& state) {
  ElboParts parts;
  const CountTensor counts = accumulate_counts(state.docs, state.posteriors, state.chains, state.config);
  parts.chains = chains_elbo(state.chains, counts);
  for (std::size_t d = 0; d < state.docs.size(); ++d) {
    const auto& p = state.posteriors[d];
    const double v = document_local_elbo(*state.docs[d], p.tau, p.lambda, state.config.prior(state.docs[d]->side));
    if (!std::isfinite(v)) throw NumericError("ELBO term of document '" + state.docs[d]->id + "' is not finite");
    parts.documents += v;
  }
  return parts;
}

inline double compute_elbo(const ModelState& state) { return compute_elbo_parts(state).total(); }

struct FittedModel {
  ModelConfig config;
  std::string method = "jdtm";
  int horizon = 0;
  int vocab = 0;
  std::vector<TopicChain> chains;
  std::vector<double> elbo_trace;
  std::vector<double> sweep_seconds;
  bool converged = false;
  int line_search_warnings = 0;

  std::span<const TopicChain> chain_span() const { return chains; }
};

struct FitOptions {
  unsigned threads = 1;
  std::size_t block_size = 512;
  /// Called after every sweep with (sweep, elbo, seconds).
  std::function<void(int, double, double)> on_sweep;
  /// Optional instrumentation of every topic read in document updates.
  const AccessProbe* probe = nullptr;
};

/// One document phase: updates every posterior (warm-started from its tau)
/// and returns the count tensor. Documents in a block update in parallel;
/// counts are merged in document order so results do not depend on threads.
inline CountTensor document_phase(ModelState& state, const FitOptions& opt) {
  CountTensor counts = make_counts(state.chains);
  const std::size_t n = state.docs.size();
  const std::size_t block = std::max<std::size_t>(1, opt.block_size);
  for (std::size_t begin = 0; begin < n; begin += block) {
    const std::size_t end = std::min(n, begin + block);
    parallel_for(end - begin, opt.threads, [&](std::size_t i) {
      const std::size_t d = begin + i;
      state.posteriors[d] = update_document(*state.docs[d], state.chains, state.config,
                                            state.posteriors[d].tau, opt.probe);
    });
    for (std::size_t d = begin; d < end; ++d)
      add_document_counts(counts, state.chains, *state.docs[d], state.posteriors[d], state.config);
  }
  return counts;
}

inline FittedModel fit(const CorpusPair& corpus, const ModelConfig& cfg, const FitOptions& opt = {}) {
  ModelState state = init_state(corpus, cfg);
  FittedModel model;
  model.config = cfg;
  model.horizon = state.horizon;
  model.vocab = state.vocab;
  const unsigned threads = std::max(1u, opt.threads);
  const CgOptions cg = cfg.cg_options();

  double previous = -std::numeric_limits<double>::infinity();
  for (int sweep = 1; sweep <= cfg.sweep_max; ++sweep) {
    const auto started = std::chrono::steady_clock::now();
    const CountTensor counts = document_phase(state, opt);

    std::vector<ChainUpdate> updates(state.chains.size());
    parallel_for(state.chains.size(), threads, [&](std::size_t c) {
      updates[c] = update_chain(state.chains[c], counts[c], cg);
    });
    for (std::size_t c = 0; c < updates.size(); ++c) {
      if (updates[c].line_search_failed) ++model.line_search_warnings;
      state.chains[c] = std::move(updates[c].chain);
    }

    double documents = 0.0;
    for (const auto& p : state.posteriors) documents += p.local_elbo;
    const double elbo = chains_elbo(state.chains, counts) + documents;
    if (!std::isfinite(elbo)) throw NumericError("ELBO became non-finite at sweep " + std::to_string(sweep));
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    model.elbo_trace.push_back(elbo);
    model.sweep_seconds.push_back(seconds);
    if (opt.on_sweep) opt.on_sweep(sweep, elbo, seconds);

    if (sweep > 1 && std::abs(elbo - previous) <= cfg.elbo_rel_tol * std::abs(previous)) {
      model.converged = true;
      break;
    }
    previous = elbo;
  }
  model.chains = std::move(state.chains);
  return model;
}

}  // namespace leadlag
