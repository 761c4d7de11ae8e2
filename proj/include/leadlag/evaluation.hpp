#pragma once

// Held-out scoring by document completion: fold the first half of a test
// document into the frozen model, then score the second half under the
// mixture sum_k theta_k p(w | k). Also the DTMs/DTMc baselines, seeded
// train/validation/test splits and grid search over the lag.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "leadlag/corpus.hpp"
#include "leadlag/error.hpp"
#include "leadlag/jdtm.hpp"
#include "leadlag/numeric.hpp"
#include "leadlag/parallel.hpp"
#include "leadlag/random.hpp"

namespace leadlag {

struct SplitDocument {
  Document first_half;
  Document second_half;
};

/// Tokens expanded in (word, occurrence) order; even positions go to the
/// first half, odd positions to the second.
inline SplitDocument split_document(const Document& doc) {
  if (doc.total < 2) throw ValidationError("document '" + doc.id + "' too short to split (N = " + std::to_string(doc.total) + ")");
  std::vector<WordCount> first, second;
  long position = 0;
  for (const auto& wc : doc.counts) {
    // positions position .. position + count - 1
    const long evens = (wc.count + (position % 2 == 0 ? 1 : 0)) / 2;
    const long odds = wc.count - evens;
    if (evens > 0) first.push_back({wc.word, static_cast<int>(evens)});
    if (odds > 0) second.push_back({wc.word, static_cast<int>(odds)});
    position += wc.count;
  }
  return {Document::make(doc.id, doc.slice, doc.side, std::move(first)),
          Document::make(doc.id, doc.slice, doc.side, std::move(second))};
}

// ---------------------------------------------------------------------------
// Baselines

/// Separate fits: no shared topics, so each corpus only sees its own chains.
inline ModelConfig dtms_config(const ModelConfig& cfg) {
  ModelConfig c = cfg;
  c.J = cfg.K + cfg.J;
  c.H = cfg.K + cfg.H;
  c.K = 0;
  c.lag = 0;
  return c;
}

/// Combined fit: every document is treated as a leading document.
inline ModelConfig dtmc_config(const ModelConfig& cfg) {
  ModelConfig c = cfg;
  c.J = cfg.K + cfg.J + cfg.H;
  c.K = 0;
  c.H = 0;
  c.lag = 0;
  return c;
}

inline CorpusPair relabel_as_lead(const CorpusPair& corpus) {
  CorpusPair out = corpus.empty_like();
  corpus.for_each_document([&](const Document& d) {
    Document copy = d;
    copy.side = Side::lead;
    out.add(std::move(copy));
  });
  return out;
}

enum class Method { jdtm, dtms, dtmc };

inline std::string_view to_string(Method m) {
  switch (m) {
    case Method::jdtm: return "jdtm";
    case Method::dtms: return "dtms";
    case Method::dtmc: return "dtmc";
  }
  return "?";
}

inline Method method_from_string(std::string_view s) {
  if (s == "jdtm") return Method::jdtm;
  if (s == "dtms") return Method::dtms;
  if (s == "dtmc") return Method::dtmc;
  throw ValidationError("unknown method '" + std::string(s) + "' (expected jdtm, dtms or dtmc)");
}

/// Fits the model or one of the baselines; `cfg` describes the JDTM topic counts.
inline FittedModel fit_method(const CorpusPair& corpus, const ModelConfig& cfg, Method method,
                              const FitOptions& opt = {}) {
  FittedModel m;
  switch (method) {
    case Method::jdtm: m = fit(corpus, cfg, opt); break;
    case Method::dtms: m = fit(corpus, dtms_config(cfg), opt); break;
    case Method::dtmc: m = fit(relabel_as_lead(corpus), dtmc_config(cfg), opt); break;
  }
  m.method = std::string(to_string(method));
  return m;
}

/// Side under which a document is scored by the given model.
inline Side scoring_side(const FittedModel& model, Side side) { return model.method == "dtmc" ? Side::lead : side; }

// ---------------------------------------------------------------------------
// Fold-in and completion perplexity

/// Word distributions softmax(m_tilde) of every chain row.
class TopicTable {
 public:
  explicit TopicTable(std::span<const TopicChain> chains) : chains_(chains) {
    probs_.reserve(chains.size());
    for (const auto& c : chains) {
      std::vector<double> p(c.cells());
      for (int r = 0; r < c.length; ++r) {
        auto row = c.word_distribution(r);
        std::copy(row.begin(), row.end(), p.begin() + static_cast<std::ptrdiff_t>(r) * c.vocab);
      }
      probs_.push_back(std::move(p));
    }
  }

  double prob(const TopicAccess& a, int word) const {
    const TopicChain& c = chains_[static_cast<std::size_t>(a.chain)];
    return probs_[static_cast<std::size_t>(a.chain)][static_cast<std::size_t>(c.row(a.chain_time)) * c.vocab + word];
  }

 private:
  std::span<const TopicChain> chains_;
  std::vector<std::vector<double>> probs_;
};

/// Topic proportions of a (partial) document with the chains frozen.
inline std::vector<double> fold_in(const FittedModel& model, const Document& d1) {
  Document doc = d1;
  doc.side = scoring_side(model, d1.side);
  const DocumentPosterior post = update_document(doc, model.chains, model.config);
  std::vector<double> theta = post.tau;
  double sum = 0.0;
  for (double t : theta) sum += t;
  for (double& t : theta) t /= sum;
  return theta;
}

struct CompletionScore {
  double log_likelihood = 0.0;
  long tokens = 0;
  bool underflow = false;
};

/// log p(d2 | theta) = sum over tokens of log sum_k theta_k p(w | k).
inline CompletionScore score_completion(const TopicTable& table, const ModelConfig& cfg, std::span<const double> theta,
                                        const Document& d2, Side side) {
  CompletionScore out;
  const int K = cfg.topics(side);
  if (static_cast<int>(theta.size()) != K) throw ValidationError("topic proportions have the wrong dimension");
  std::vector<TopicAccess> access(static_cast<std::size_t>(K));
  for (int slot = 0; slot < K; ++slot) access[static_cast<std::size_t>(slot)] = resolve_topic(cfg, side, slot, d2.slice);
  for (const auto& wc : d2.counts) {
    double p = 0.0;
    for (int slot = 0; slot < K; ++slot)
      p += theta[static_cast<std::size_t>(slot)] * table.prob(access[static_cast<std::size_t>(slot)], wc.word);
    if (!(p >= numeric::kProbFloor)) out.underflow = true;
    out.log_likelihood += wc.count * numeric::safe_log(p);
    out.tokens += wc.count;
  }
  return out;
}

struct DocumentScore {
  std::string id;
  Side side = Side::lead;
  int slice = 1;
  double log_likelihood = 0.0;
  long tokens = 0;
  bool underflow = false;
};

struct CorpusScore {
  double log_likelihood = 0.0;
  long tokens = 0;
  std::size_t documents = 0;
  /// exp(-L / N); NaN when nothing was scored.
  double perplexity() const {
    return tokens > 0 ? std::exp(-log_likelihood / static_cast<double>(tokens)) : std::nan("");
  }
};

struct PerplexityReport {
  CorpusScore lead, lag, combined;
  std::vector<DocumentScore> documents;

  const CorpusScore& corpus(Side side) const { return side == Side::lead ? lead : lag; }
};

/// Completion perplexity of the given test documents. Documents score in
/// parallel; totals are reduced in input order.
inline PerplexityReport completion_perplexity(const FittedModel& model, std::span<const Document* const> docs,
                                              unsigned threads = 1) {
  const TopicTable table(model.chains);
  PerplexityReport report;
  report.documents.resize(docs.size());
  parallel_for(docs.size(), threads, [&](std::size_t i) {
    const Document& doc = *docs[i];
    const SplitDocument split = split_document(doc);
    const std::vector<double> theta = fold_in(model, split.first_half);
    const CompletionScore s =
        score_completion(table, model.config, theta, split.second_half, scoring_side(model, doc.side));
    report.documents[i] = {doc.id, doc.side, doc.slice, s.log_likelihood, s.tokens, s.underflow};
  });
  for (const auto& d : report.documents) {
    CorpusScore& side = d.side == Side::lead ? report.lead : report.lag;
    for (CorpusScore* c : {&side, &report.combined}) {
      c->log_likelihood += d.log_likelihood;
      c->tokens += d.tokens;
      ++c->documents;
    }
  }
  return report;
}

inline PerplexityReport completion_perplexity(const FittedModel& model, const CorpusPair& test, unsigned threads = 1) {
  const auto docs = test.documents();
  return completion_perplexity(model, docs, threads);
}

inline nlohmann::ordered_json to_json(const CorpusScore& s) {
  nlohmann::ordered_json j;
  j["ppl"] = s.tokens > 0 ? nlohmann::ordered_json(s.perplexity()) : nlohmann::ordered_json(nullptr);
  j["log_likelihood"] = s.log_likelihood;
  j["tokens"] = s.tokens;
  j["documents"] = s.documents;
  return j;
}

inline nlohmann::ordered_json to_json(const PerplexityReport& r) {
  nlohmann::ordered_json j;
  j["lead"] = to_json(r.lead);
  j["lag"] = to_json(r.lag);
  j["combined"] = to_json(r.combined);
  auto docs = nlohmann::ordered_json::array();
  for (const auto& d : r.documents)
    docs.push_back({{"id", d.id},
                    {"side", std::string(to_string(d.side))},
                    {"t", d.slice},
                    {"log_likelihood", d.log_likelihood},
                    {"tokens", d.tokens},
                    {"underflow", d.underflow}});
  j["documents"] = std::move(docs);
  return j;
}

/// CSV rows (method, corpus, lag, ppl), one per corpus, without header.
inline std::string perplexity_csv_rows(const PerplexityReport& r, std::string_view method, int lag) {
  std::string out;
  char buf[128];
  const std::pair<const char*, const CorpusScore*> rows[] = {{"lead", &r.lead}, {"lag", &r.lag}, {"combined", &r.combined}};
  for (const auto& [name, score] : rows) {
    std::snprintf(buf, sizeof buf, ",%s,%d,%.17g\n", name, lag, score->perplexity());
    out += std::string(method) + buf;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Splits

struct SplitFractions {
  double train = 0.85;
  double validation = 0.05;
  double test = 0.10;
};

struct DataSplit {
  CorpusPair train, validation, test;
};

/// Document-level split stratified by (side, t): each slice is shuffled with
/// its own derived stream and cut into validation, test and train parts.
inline DataSplit split_corpus(const CorpusPair& corpus, std::uint64_t seed, SplitFractions f = {}) {
  if (f.train < 0 || f.validation < 0 || f.test < 0 || !(f.train + f.validation + f.test > 0))
    throw ValidationError("split fractions must be non-negative with a positive sum");
  const double total = f.train + f.validation + f.test;
  DataSplit out{corpus.empty_like(), corpus.empty_like(), corpus.empty_like()};
  for (Side side : {Side::lead, Side::lag})
    for (int t = 1; t <= corpus.horizon(); ++t) {
      const auto& docs = corpus.slice(side, t);
      std::vector<std::size_t> order(docs.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      Rng rng = make_rng(seed, {0x5b117, static_cast<std::uint64_t>(side), static_cast<std::uint64_t>(t)});
      std::shuffle(order.begin(), order.end(), rng);
      const auto n = static_cast<double>(docs.size());
      const auto n_val = static_cast<std::size_t>(std::lround(n * f.validation / total));
      const auto n_test = std::min(docs.size() - std::min(docs.size(), n_val),
                                   static_cast<std::size_t>(std::lround(n * f.test / total)));
      for (std::size_t i = 0; i < order.size(); ++i) {
        CorpusPair& target = i < n_val ? out.validation : (i < n_val + n_test ? out.test : out.train);
        target.add(docs[order[i]]);
      }
    }
  return out;
}

// ---------------------------------------------------------------------------
// Lag selection

struct LagScore {
  int lag = 0;
  double perplexity = 0.0;
};

struct LagSelection {
  int best_lag = 0;
  std::vector<LagScore> scores;
};

/// Fits one JDTM per lag on `train` and scores the lagged corpus of
/// `validation`. Ties (relative difference below 1e-9) go to the smaller lag.
inline LagSelection select_lag(const CorpusPair& train, const CorpusPair& validation, const ModelConfig& cfg,
                               std::vector<int> grid, const FitOptions& opt = {}) {
  if (grid.empty()) throw ValidationError("lag grid is empty");
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  for (int l : grid)
    if (l < 0 || l >= train.horizon())
      throw ValidationError("lag " + std::to_string(l) + " is infeasible for horizon T = " + std::to_string(train.horizon()));
  LagSelection out;
  if (grid.size() == 1) {
    out.best_lag = grid.front();
    out.scores.push_back({grid.front(), std::nan("")});
    return out;
  }
  std::vector<const Document*> scored;
  for (int t = 1; t <= validation.horizon(); ++t)
    for (const auto& d : validation.slice(Side::lag, t)) scored.push_back(&d);
  if (scored.empty()) throw ValidationError("validation split has no lagged documents");

  double best = std::numeric_limits<double>::infinity();
  for (int l : grid) {
    ModelConfig c = cfg;
    c.lag = l;
    const FittedModel m = fit(train, c, opt);
    const double ppl = completion_perplexity(m, scored, opt.threads).lag.perplexity();
    out.scores.push_back({l, ppl});
    if (ppl < best * (1.0 - 1e-9)) {
      best = ppl;
      out.best_lag = l;
    }
  }
  return out;
}

inline LagSelection select_lag(const CorpusPair& corpus, const ModelConfig& cfg, std::vector<int> grid,
                               std::uint64_t split_seed, const FitOptions& opt = {}) {
  const DataSplit split = split_corpus(corpus, split_seed);
  return select_lag(split.train, split.validation, cfg, std::move(grid), opt);
}

}  // namespace leadlag
