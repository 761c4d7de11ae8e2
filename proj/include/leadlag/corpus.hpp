#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "leadlag/error.hpp"

namespace leadlag {

enum class Side { lead, lag };

inline std::string_view to_string(Side s) { return s == Side::lead ? "lead" : "lag"; }

inline Side side_from_string(std::string_view s) {
  if (s == "lead") return Side::lead;
  if (s == "lag") return Side::lag;
  throw ValidationError("unknown side '" + std::string(s) + "' (expected lead or lag)");
}

class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
    index_.reserve(tokens_.size());
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
      if (!index_.emplace(tokens_[i], static_cast<int>(i)).second)
        throw ValidationError("duplicate vocabulary token '" + tokens_[i] + "' at index " +
                              std::to_string(i));
    }
  }

  /// Synthetic vocabulary w0000, w0001, ...
  static Vocabulary synthetic(int size) {
    std::vector<std::string> tokens;
    tokens.reserve(static_cast<std::size_t>(size));
    const std::size_t width = std::max<std::size_t>(4, std::to_string(std::max(size - 1, 0)).size());
    for (int i = 0; i < size; ++i) {
      const std::string digits = std::to_string(i);
      tokens.push_back("w" + std::string(width - digits.size(), '0') + digits);
    }
    return Vocabulary(std::move(tokens));
  }

  int size() const { return static_cast<int>(tokens_.size()); }
  const std::string& token(int i) const { return tokens_.at(static_cast<std::size_t>(i)); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  /// -1 when absent.
  int find(const std::string& token) const {
    auto it = index_.find(token);
    return it == index_.end() ? -1 : it->second;
  }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

struct WordCount {
  int word = 0;
  int count = 0;
  friend bool operator==(const WordCount&, const WordCount&) = default;
};

/// Bag-of-words document. Counts are sorted by word index with positive counts.
struct Document {
  std::string id;
  int slice = 1;  // 1-based time index
  Side side = Side::lead;
  std::vector<WordCount> counts;
  int total = 0;

  static Document make(std::string id, int slice, Side side, std::vector<WordCount> counts) {
    Document d{std::move(id), slice, side, std::move(counts), 0};
    d.normalize();
    return d;
  }

  /// Sorts by word, merges duplicates, drops zeros and recomputes the total.
  void normalize() {
    std::sort(counts.begin(), counts.end(),
              [](const WordCount& a, const WordCount& b) { return a.word < b.word; });
    std::vector<WordCount> merged;
    merged.reserve(counts.size());
    for (const auto& wc : counts) {
      if (wc.count == 0) continue;
      if (!merged.empty() && merged.back().word == wc.word)
        merged.back().count += wc.count;
      else
        merged.push_back(wc);
    }
    counts = std::move(merged);
    total = 0;
    for (const auto& wc : counts) total += wc.count;
  }

  friend bool operator==(const Document&, const Document&) = default;
};

/// Two time-sliced corpora over one vocabulary. Slices are stored 0-based
/// internally; the public accessors take the 1-based time index.
class CorpusPair {
 public:
  CorpusPair() = default;
  CorpusPair(int horizon, Vocabulary vocab)
      : horizon_(horizon),
        vocab_(std::move(vocab)),
        lead_(static_cast<std::size_t>(horizon)),
        lag_(static_cast<std::size_t>(horizon)) {}

  int horizon() const { return horizon_; }
  const Vocabulary& vocab() const { return vocab_; }
  int vocab_size() const { return vocab_.size(); }

  const std::vector<Document>& slice(Side side, int t) const {
    return slices(side).at(static_cast<std::size_t>(t - 1));
  }
  const std::vector<std::vector<Document>>& slices(Side side) const {
    return side == Side::lead ? lead_ : lag_;
  }

  /// Adds a document, validating indices and growing the horizon when asked.
  void add(Document doc, bool grow = false) {
    if (doc.slice < 1) throw ValidationError("document '" + doc.id + "' has slice t < 1");
    if (doc.slice > horizon_) {
      if (!grow)
        throw ValidationError("document '" + doc.id + "' slice " + std::to_string(doc.slice) +
                              " exceeds horizon " + std::to_string(horizon_));
      horizon_ = doc.slice;
      lead_.resize(static_cast<std::size_t>(horizon_));
      lag_.resize(static_cast<std::size_t>(horizon_));
    }
    for (const auto& wc : doc.counts) {
      if (wc.word < 0 || wc.word >= vocab_.size())
        throw ValidationError("document '" + doc.id + "' references word index " +
                              std::to_string(wc.word) + " outside vocabulary of size " +
                              std::to_string(vocab_.size()));
      if (wc.count <= 0)
        throw ValidationError("document '" + doc.id + "' has non-positive count");
    }
    auto& target = doc.side == Side::lead ? lead_ : lag_;
    target[static_cast<std::size_t>(doc.slice - 1)].push_back(std::move(doc));
  }

  std::size_t num_documents(Side side) const {
    std::size_t n = 0;
    for (const auto& s : slices(side)) n += s.size();
    return n;
  }
  std::size_t num_documents() const { return num_documents(Side::lead) + num_documents(Side::lag); }

  long long num_tokens() const {
    long long n = 0;
    for_each_document([&](const Document& d) { n += d.total; });
    return n;
  }

  /// Visits lead slices 1..T then lag slices 1..T, in stored order.
  template <class F>
  void for_each_document(F&& f) const {
    for (const auto* side : {&lead_, &lag_})
      for (const auto& slice : *side)
        for (const auto& doc : slice) f(doc);
  }

  std::vector<const Document*> documents() const {
    std::vector<const Document*> out;
    out.reserve(num_documents());
    for_each_document([&](const Document& d) { out.push_back(&d); });
    return out;
  }

  /// Same horizon and vocabulary, no documents.
  CorpusPair empty_like() const { return CorpusPair(horizon_, vocab_); }

 private:
  int horizon_ = 0;
  Vocabulary vocab_;
  std::vector<std::vector<Document>> lead_;
  std::vector<std::vector<Document>> lag_;
};

// ---------------------------------------------------------------------------
// File formats

inline Vocabulary load_vocabulary(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open vocabulary file " + path.string());
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    tokens.push_back(line);
  }
  // a trailing empty line is a file terminator, not a token
  while (!tokens.empty() && tokens.back().empty()) tokens.pop_back();
  if (tokens.empty()) throw ValidationError("vocabulary " + path.string() + " is empty");
  return Vocabulary(std::move(tokens));
}

inline void write_vocabulary(const Vocabulary& vocab, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& t : vocab.tokens()) out << t << '\n';
}

/// Parses one JSONL record; line numbers are 1-based.
inline Document parse_document_record(const std::string& text, long line_no) {
  nlohmann::json rec;
  try {
    rec = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("malformed JSON: ") + e.what(), line_no);
  }
  if (!rec.is_object()) throw ParseError("record is not a JSON object", line_no);
  for (const char* key : {"id", "t", "side", "counts"})
    if (!rec.contains(key)) throw ParseError(std::string("missing field '") + key + "'", line_no);
  try {
    Document doc;
    doc.id = rec.at("id").is_string() ? rec.at("id").get<std::string>() : rec.at("id").dump();
    if (!rec.at("t").is_number_integer()) throw ParseError("field 't' must be an integer", line_no);
    doc.slice = rec.at("t").get<int>();
    if (doc.slice < 1)
      throw ValidationError("line " + std::to_string(line_no) + ": slice t=" +
                            std::to_string(doc.slice) + " is below 1");
    doc.side = side_from_string(rec.at("side").get<std::string>());
    const auto& counts = rec.at("counts");
    if (!counts.is_object()) throw ParseError("field 'counts' must be an object", line_no);
    for (auto it = counts.begin(); it != counts.end(); ++it) {
      int word = 0;
      std::size_t used = 0;
      try {
        word = std::stoi(it.key(), &used);
      } catch (...) {
        used = 0;
      }
      if (used != it.key().size() || it.key().empty())
        throw ParseError("word key '" + it.key() + "' is not an integer", line_no);
      if (!it.value().is_number_integer())
        throw ParseError("count for word " + it.key() + " is not an integer", line_no);
      const long long c = it.value().get<long long>();
      if (c <= 0)
        throw ValidationError("line " + std::to_string(line_no) + ": count for word " + it.key() +
                              " must be positive");
      doc.counts.push_back({word, static_cast<int>(c)});
    }
    doc.normalize();
    if (doc.total < 1)
      throw ValidationError("line " + std::to_string(line_no) + ": document '" + doc.id +
                            "' has no tokens");
    return doc;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad field type: ") + e.what(), line_no);
  }
}

inline CorpusPair load_corpus(const std::filesystem::path& corpus_path, Vocabulary vocab) {
  std::ifstream in(corpus_path);
  if (!in) throw ValidationError("cannot open corpus file " + corpus_path.string());
  CorpusPair corpus(0, std::move(vocab));
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    Document doc = parse_document_record(line, line_no);
    try {
      corpus.add(std::move(doc), /*grow=*/true);
    } catch (const ValidationError& e) {
      throw ValidationError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (corpus.num_documents() == 0) throw ValidationError("no documents in " + corpus_path.string());
  return corpus;
}

inline CorpusPair load_corpus(const std::filesystem::path& corpus_path,
                              const std::filesystem::path& vocab_path) {
  return load_corpus(corpus_path, load_vocabulary(vocab_path));
}

inline std::string document_record(const Document& doc) {
  nlohmann::ordered_json counts = nlohmann::ordered_json::object();
  for (const auto& wc : doc.counts) counts[std::to_string(wc.word)] = wc.count;
  nlohmann::ordered_json rec;
  rec["id"] = doc.id;
  rec["t"] = doc.slice;
  rec["side"] = std::string(to_string(doc.side));
  rec["counts"] = std::move(counts);
  return rec.dump();
}

inline void write_corpus(const CorpusPair& corpus, std::ostream& out) {
  corpus.for_each_document([&](const Document& d) { out << document_record(d) << '\n'; });
}

inline void write_corpus(const CorpusPair& corpus, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  write_corpus(corpus, out);
}

}  // namespace leadlag
