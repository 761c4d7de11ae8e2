// Generates a small synthetic corpus pair, fits JDTM and the two baselines on
// the training split and prints test perplexities plus a few top words.

#include <cstdio>
#include <iostream>

#include "leadlag/leadlag.hpp"

using namespace leadlag;

int main() {
  GenConfig gen;
  gen.T = 8;
  gen.V = 200;
  gen.K = 3;
  gen.J = 1;
  gen.H = 1;
  gen.lag = 2;
  gen.docs_per_slice = {20, 10};
  gen.words_per_doc = {40, 20};
  gen.seed = 7;
  const SyntheticData data = generate(gen);
  std::printf("corpus: %zu documents, %lld tokens, V = %d, T = %d\n", data.corpus.num_documents(),
              data.corpus.num_tokens(), data.corpus.vocab_size(), data.corpus.horizon());

  const DataSplit split = split_corpus(data.corpus, 1);

  ModelConfig cfg;
  cfg.K = gen.K;
  cfg.J = gen.J;
  cfg.H = gen.H;
  cfg.lag = gen.lag;
  cfg.sigma2_shared = cfg.sigma2_lead = cfg.sigma2_lag = 1.0;
  cfg.sweep_max = 40;

  for (Method m : {Method::jdtm, Method::dtms, Method::dtmc}) {
    const FittedModel model = fit_method(split.train, cfg, m);
    const PerplexityReport r = completion_perplexity(model, split.test);
    std::printf("%-5s sweeps %2zu  lead %.2f  lag %.2f  combined %.2f\n", std::string(to_string(m)).c_str(),
                model.elbo_trace.size(), r.lead.perplexity(), r.lag.perplexity(), r.combined.perplexity());
    if (m == Method::jdtm) {
      for (const TopWord& w : top_words(model.chains, 3))
        if (w.type == TopicType::shared && w.t == 1)
          std::printf("  shared topic %d, t=1, rank %d: %s (%.3f)\n", w.topic, w.rank,
                      data.corpus.vocab().token(w.word).c_str(), w.prob);
    }
  }
  return 0;
}
