#pragma once

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include "leadlag/chain.hpp"
#include "leadlag/corpus.hpp"
#include "leadlag/jdtm.hpp"

namespace leadlag {

struct TopWord {
  TopicType type = TopicType::shared;
  int topic = 0;
  int t = 0;     // chain time
  int rank = 0;  // 1-based
  int word = 0;
  double prob = 0.0;
};

/// Top-n words of every chain slice, ordered by (-probability, word index).
inline std::vector<TopWord> top_words(std::span<const TopicChain> chains, int topn) {
  std::vector<TopWord> out;
  for (const auto& c : chains)
    for (int r = 0; r < c.length; ++r) {
      const auto p = c.word_distribution(r);
      std::vector<int> order(p.size());
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return p[static_cast<std::size_t>(a)] > p[static_cast<std::size_t>(b)]; });
      const int n = std::min<int>(topn, static_cast<int>(order.size()));
      for (int i = 0; i < n; ++i)
        out.push_back({c.type, c.index, c.t_start + r, i + 1, order[static_cast<std::size_t>(i)],
                       p[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])]});
    }
  return out;
}

inline void write_top_words_csv(const std::vector<TopWord>& rows, const Vocabulary& vocab, std::ostream& out) {
  out << "type,topic,t,rank,word,prob\n";
  char prob[32];
  for (const auto& w : rows) {
    std::snprintf(prob, sizeof prob, "%.17g", w.prob);
    out << to_string(w.type) << ',' << w.topic << ',' << w.t << ',' << w.rank << ',' << vocab.token(w.word) << ','
        << prob << '\n';
  }
}

}  // namespace leadlag
