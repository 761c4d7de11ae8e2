#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "leadlag/model_io.hpp"
#include "leadlag/report.hpp"
#include "leadlag/synthgen.hpp"

using namespace leadlag;
namespace fs = std::filesystem;

namespace {

struct Fixture {
  SyntheticData data;
  FittedModel model;
  fs::path dir;

  Fixture() {
    GenConfig g;
    g.T = 2;
    g.V = 25;
    g.K = 1;
    g.J = 1;
    g.H = 1;
    g.lag = 1;
    g.docs_per_slice = {5, 3};
    g.words_per_doc = {15, 5};
    data = generate(g);
    ModelConfig cfg;
    cfg.K = 1;
    cfg.J = 1;
    cfg.H = 1;
    cfg.lag = 1;
    cfg.sweep_max = 5;
    model = fit(data.corpus, cfg);
    dir = fs::temp_directory_path() / ("leadlag_model_io_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::create_directories(dir);
  }
  ~Fixture() { fs::remove_all(dir); }
};

std::string top_words_csv(const std::vector<TopicChain>& chains, const Vocabulary& vocab) {
  std::ostringstream out;
  write_top_words_csv(top_words(chains, 7), vocab, out);
  return out.str();
}

}  // namespace

TEST(ModelIo, RoundTripPreservesTopWordRankings) {
  Fixture f;
  save_model(f.model, f.data.corpus.vocab(), f.dir / "model.json");
  const LoadedModel loaded = load_model(f.dir / "model.json");
  EXPECT_EQ(loaded.model.method, f.model.method);
  EXPECT_EQ(loaded.model.horizon, 2);
  EXPECT_EQ(loaded.model.elbo_trace, f.model.elbo_trace);
  EXPECT_EQ(loaded.vocab.tokens(), f.data.corpus.vocab().tokens());
  ASSERT_EQ(loaded.model.chains.size(), f.model.chains.size());
  for (std::size_t c = 0; c < f.model.chains.size(); ++c) {
    EXPECT_EQ(loaded.model.chains[c].alpha_hat, f.model.chains[c].alpha_hat);
    EXPECT_EQ(loaded.model.chains[c].m_tilde, f.model.chains[c].m_tilde);
  }
  EXPECT_EQ(top_words_csv(loaded.model.chains, loaded.vocab), top_words_csv(f.model.chains, f.data.corpus.vocab()));
}

TEST(ModelIo, ConfigRoundTrip) {
  ModelConfig c;
  c.K = 4;
  c.J = 2;
  c.H = 3;
  c.lag = 2;
  c.sigma2_lag = 0.25;
  c.eta = 0.3;
  c.init_seed = 99;
  const ModelConfig back = model_config_from_json(nlohmann::json::parse(to_json(c).dump()));
  EXPECT_EQ(to_json(back).dump(), to_json(c).dump());
}

TEST(ModelIo, WrongFormatTagIsRejected) {
  Fixture f;
  auto j = model_to_json(f.model, f.data.corpus.vocab());
  j["format"] = "something-else";
  std::ofstream(f.dir / "bad.json") << j.dump();
  EXPECT_THROW(load_model(f.dir / "bad.json"), ValidationError);
}

TEST(ModelIo, WrongVersionIsRejected) {
  Fixture f;
  auto j = model_to_json(f.model, f.data.corpus.vocab());
  j["version"] = kModelVersion + 1;
  EXPECT_THROW(model_from_json(nlohmann::json::parse(j.dump())), ValidationError);
}

TEST(ModelIo, TruncatedFileIsRejected) {
  Fixture f;
  const std::string text = model_to_json(f.model, f.data.corpus.vocab()).dump();
  std::ofstream(f.dir / "cut.json") << text.substr(0, text.size() / 2);
  try {
    load_model(f.dir / "cut.json");
    FAIL() << "expected an error";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("truncated"), std::string::npos);
  }
}

TEST(ModelIo, InconsistentMomentsAreRejected) {
  Fixture f;
  auto j = model_to_json(f.model, f.data.corpus.vocab());
  j["chains"][0]["m_tilde"][0][0] = j["chains"][0]["m_tilde"][0][0].get<double>() + 0.5;
  EXPECT_THROW(model_from_json(nlohmann::json::parse(j.dump())), ValidationError);
}

TEST(Report, TopWordsAreSortedPerSlice) {
  Fixture f;
  const auto rows = top_words(f.model.chains, 5);
  // shared chain spans T + l slices, the others T
  EXPECT_EQ(rows.size(), static_cast<std::size_t>(5 * (3 + 2 + 2)));
  for (std::size_t i = 1; i < rows.size(); ++i)
    if (rows[i].rank > 1) {
      EXPECT_EQ(rows[i].rank, rows[i - 1].rank + 1);
      EXPECT_LE(rows[i].prob, rows[i - 1].prob);
    }
  std::ostringstream out;
  write_top_words_csv(rows, f.data.corpus.vocab(), out);
  EXPECT_EQ(out.str().substr(0, out.str().find('\n')), "type,topic,t,rank,word,prob");
}
