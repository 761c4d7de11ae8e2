#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

const fs::path kCli = LEADLAG_CLI_PATH;

int run(const std::string& args, const fs::path& log = "/dev/null") {
  const std::string cmd = "\"" + kCli.string() + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

class Cli : public ::testing::Test {
 protected:
  fs::path dir;
  void SetUp() override {
    dir = fs::temp_directory_path() / ("leadlag_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  void TearDown() override { fs::remove_all(dir); }

  std::string p(const std::string& rel) const { return "\"" + (dir / rel).string() + "\""; }

  void generate(const std::string& out, int seed = 7) {
    ASSERT_EQ(run("generate --scenario 1 --K 2 --J 1 --H 1 --lag 1 --T 4 --V 40 --docs-mean 6 --docs-offset 4 "
                  "--words-mean 15 --words-offset 5 --seed " + std::to_string(seed) + " --out " + p(out)),
              0);
  }
};

}  // namespace

TEST_F(Cli, GenerateFitReportEvalPipeline) {
  generate("d");
  EXPECT_TRUE(fs::exists(dir / "d/corpus.jsonl"));
  EXPECT_TRUE(fs::exists(dir / "d/vocab.txt"));
  EXPECT_TRUE(fs::exists(dir / "d/truth.json"));
  EXPECT_TRUE(fs::exists(dir / "d/manifest.json"));

  ASSERT_EQ(run("fit --corpus " + p("d/corpus.jsonl") + " --vocab " + p("d/vocab.txt") +
                " --K 2 --J 1 --H 1 --lag 1 --sweep-max 5 --split train --out " + p("m")),
            0);
  EXPECT_TRUE(fs::exists(dir / "m/model.json"));
  const std::string elbo = slurp(dir / "m/elbo.csv");
  EXPECT_EQ(elbo.substr(0, elbo.find('\n')), "sweep,elbo,seconds");
  const auto manifest = nlohmann::json::parse(slurp(dir / "m/manifest.json"));
  EXPECT_EQ(manifest.at("command"), "fit");
  EXPECT_EQ(manifest.at("options").at("K"), "2");
  EXPECT_EQ(manifest.at("options").at("sweep-max"), "5");

  // report-top-words writes next to the model by default, replacing the fit manifest
  ASSERT_EQ(run("report-top-words --model " + p("m/model.json") + " --topn 7"), 0);
  const std::string top = slurp(dir / "m/top_words.csv");
  EXPECT_EQ(top.substr(0, top.find('\n')), "type,topic,t,rank,word,prob");
  // shared chain spans T + l = 5 slices, specific chains T = 4; 7 words each
  EXPECT_EQ(std::count(top.begin(), top.end(), '\n'), 1 + 7 * (2 * 5 + 4 + 4));

  ASSERT_EQ(run("eval --model " + p("m/model.json") + " --corpus " + p("d/corpus.jsonl") + " --vocab " + p("d/vocab.txt") +
                " --out " + p("e")),
            0);
  const std::string csv = slurp(dir / "e/perplexity.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "method,corpus,lag,ppl");
  const auto report = nlohmann::json::parse(slurp(dir / "e/perplexity.json"));
  EXPECT_GT(report.at("combined").at("ppl").get<double>(), 1.0);

}

TEST_F(Cli, GenerationIsBitIdentical) {
  generate("a", 3);
  generate("b", 3);
  EXPECT_EQ(slurp(dir / "a/corpus.jsonl"), slurp(dir / "b/corpus.jsonl"));
  EXPECT_EQ(slurp(dir / "a/truth.json"), slurp(dir / "b/truth.json"));
}

TEST_F(Cli, FitIsReproducibleAndIndependentOfThreads) {
  generate("d");
  const std::string common = "fit --corpus " + p("d/corpus.jsonl") + " --vocab " + p("d/vocab.txt") + " --K 2 --sweep-max 4 --lag 1";
  ASSERT_EQ(run(common + " --out " + p("m1")), 0);
  ASSERT_EQ(run("--threads 3 " + common + " --out " + p("m2")), 0);
  auto strip_seconds = [](const std::string& csv) {
    std::stringstream in(csv);
    std::string line, out;
    while (std::getline(in, line)) out += line.substr(0, line.rfind(',')) + "\n";
    return out;
  };
  EXPECT_EQ(strip_seconds(slurp(dir / "m1/elbo.csv")), strip_seconds(slurp(dir / "m2/elbo.csv")));
  EXPECT_EQ(slurp(dir / "m1/model.json"), slurp(dir / "m2/model.json"));
}

TEST_F(Cli, Diagnostics) {
  generate("d");
  ASSERT_EQ(run("diagnose-ccf --corpus " + p("d/corpus.jsonl") + " --vocab " + p("d/vocab.txt") + " --words w0001,3 --max-lag 1 --out " + p("c")), 0);
  const std::string ccf = slurp(dir / "c/ccf.csv");
  EXPECT_EQ(ccf.substr(0, ccf.find('\n')), "word,lag,ccf,band_lo,band_hi");
  EXPECT_EQ(std::count(ccf.begin(), ccf.end(), '\n'), 1 + 2 * 3);
  EXPECT_NE(slurp(dir / "c/ccf.json").find("convention"), std::string::npos);

  ASSERT_EQ(run("diagnose-ccm --corpus " + p("d/corpus.jsonl") + " --vocab " + p("d/vocab.txt") +
                " --words w0001 --E 1 --surrogates 5 --resamples 2 --out " + p("m")),
            0);
  const auto summary = nlohmann::json::parse(slurp(dir / "m/ccm.json"));
  EXPECT_EQ(summary.at("results").size(), 2u);
  EXPECT_TRUE(fs::exists(dir / "m/ccm_skill.csv"));
}

TEST_F(Cli, UsageAndValidationErrorsExitWithOne) {
  EXPECT_EQ(run("generate --no-such-flag --out " + p("x")), 1);
  EXPECT_EQ(run(""), 1);
  EXPECT_EQ(run("generate --K 0 --J 0 --out " + p("x")), 1);
  generate("d");
  EXPECT_EQ(run("fit --corpus " + p("d/corpus.jsonl") + " --vocab " + p("d/vocab.txt") + " --method nope --out " + p("m")), 1);
  EXPECT_EQ(run("report-top-words --model " + p("d/vocab.txt")), 1);
  EXPECT_EQ(run("--version"), 0);
}
