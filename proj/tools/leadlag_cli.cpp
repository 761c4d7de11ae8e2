// leadlag: command-line front end for generation, fitting, evaluation,
// lag selection, diagnostics and reports.
//
// Exit codes: 0 success, 1 usage or validation error, 2 runtime error.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "leadlag/leadlag.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace leadlag;

namespace {

struct Run {
  std::string command;
  std::vector<std::string> argv;
  CLI::App* app = nullptr;
  fs::path out_dir;
  std::vector<std::string> outputs;
  std::chrono::steady_clock::time_point started = std::chrono::steady_clock::now();
  ordered_json extra = ordered_json::object();
  unsigned threads = 1;
};

void add_model_options(CLI::App* app, ModelConfig& c) {
  app->add_option("--K", c.K, "shared topics")->capture_default_str();
  app->add_option("--J", c.J, "lead-specific topics")->capture_default_str();
  app->add_option("--H", c.H, "lag-specific topics")->capture_default_str();
  app->add_option("--lag", c.lag, "lag l in slices")->capture_default_str();
  app->add_option("--sigma2-shared", c.sigma2_shared, "drift variance of shared chains")->capture_default_str();
  app->add_option("--sigma2-lead", c.sigma2_lead, "drift variance of lead-specific chains")->capture_default_str();
  app->add_option("--sigma2-lag", c.sigma2_lag, "drift variance of lag-specific chains")->capture_default_str();
  app->add_option("--obs-variance-ratio", c.obs_variance_ratio, "variational observation variance / drift variance")
      ->capture_default_str();
  app->add_option("--eta", c.eta, "Dirichlet prior of leading documents")->capture_default_str();
  app->add_option("--kappa", c.kappa, "Dirichlet prior of lagged documents")->capture_default_str();
  app->add_option("--delta2-lead", c.delta2_lead)->capture_default_str();
  app->add_option("--delta2-lag", c.delta2_lag)->capture_default_str();
  app->add_option("--varpi2-lead", c.varpi2_lead)->capture_default_str();
  app->add_option("--varpi2-lag", c.varpi2_lag)->capture_default_str();
  app->add_option("--cg-max-iter", c.cg_max_iter)->capture_default_str();
  app->add_option("--cg-tol", c.cg_tol)->capture_default_str();
  app->add_option("--doc-max-iter", c.doc_max_iter)->capture_default_str();
  app->add_option("--doc-tol", c.doc_tol)->capture_default_str();
  app->add_option("--sweep-max", c.sweep_max)->capture_default_str();
  app->add_option("--elbo-rel-tol", c.elbo_rel_tol)->capture_default_str();
  app->add_option("--init-seed", c.init_seed)->capture_default_str();
  app->add_option("--init-jitter", c.init_jitter)->capture_default_str();
}

void add_gen_options(CLI::App* app, GenConfig& g, int& scenario) {
  app->add_option("--scenario", scenario, "1 = plain natural parameters, 2 = embedded")
      ->check(CLI::IsMember({1, 2}))
      ->capture_default_str();
  app->add_option("--T", g.T)->capture_default_str();
  app->add_option("--V", g.V)->capture_default_str();
  app->add_option("--K", g.K)->capture_default_str();
  app->add_option("--J", g.J)->capture_default_str();
  app->add_option("--H", g.H)->capture_default_str();
  app->add_option("--lag", g.lag)->capture_default_str();
  app->add_option("--docs-mean", g.docs_per_slice.mean, "Poisson mean of documents per slice")->capture_default_str();
  app->add_option("--docs-offset", g.docs_per_slice.offset)->capture_default_str();
  app->add_option("--words-mean", g.words_per_doc.mean, "Poisson mean of words per document")->capture_default_str();
  app->add_option("--words-offset", g.words_per_doc.offset)->capture_default_str();
  app->add_option("--sigma2-shared", g.sigma2_shared)->capture_default_str();
  app->add_option("--sigma2-lead", g.sigma2_lead)->capture_default_str();
  app->add_option("--sigma2-lag", g.sigma2_lag)->capture_default_str();
  app->add_option("--proportion-drift", g.proportion_drift)->capture_default_str();
  app->add_option("--proportion-variance", g.proportion_variance)->capture_default_str();
  app->add_option("--embedding-dim", g.embedding_dim)->capture_default_str();
  app->add_option("--js-threshold", g.js_threshold)->capture_default_str();
  app->add_option("--js-max-resamples", g.js_max_resamples)->capture_default_str();
  app->add_option("--seed", g.seed)->capture_default_str();
}

ordered_json option_values(const CLI::App* app) {
  ordered_json j = ordered_json::object();
  for (const CLI::Option* opt : app->get_options()) {
    if (opt->get_lnames().empty()) continue;
    const std::string& name = opt->get_lnames().front();
    if (name == "help") continue;
    if (opt->count() > 0) {
      const auto& r = opt->results();
      j[name] = r.size() == 1 ? ordered_json(r.front()) : ordered_json(r);
    } else {
      j[name] = opt->get_default_str();
    }
  }
  return j;
}

std::string compiler_id() {
#if defined(__clang__)
  return "clang " __clang_version__;
#elif defined(__GNUC__)
  return "gcc " __VERSION__;
#else
  return "unknown";
#endif
}

void write_manifest(const Run& run) {
  ordered_json m;
  m["command"] = run.command;
  m["argv"] = run.argv;
  m["options"] = option_values(run.app);
  m["version"] = LEADLAG_VERSION;
  m["compiler"] = compiler_id();
  m["threads"] = run.threads;
  m["wall_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - run.started).count();
  m["outputs"] = run.outputs;
  for (auto it = run.extra.begin(); it != run.extra.end(); ++it) m[it.key()] = it.value();
  std::ofstream out(run.out_dir / "manifest.json", std::ios::binary);
  if (!out) throw Error("cannot write manifest in " + run.out_dir.string());
  out << m.dump(2) << '\n';
}

std::ofstream open_output(Run& run, const std::string& name) {
  std::ofstream out(run.out_dir / name, std::ios::binary);
  if (!out) throw Error("cannot write " + (run.out_dir / name).string());
  run.outputs.push_back(name);
  return out;
}

void prepare_out_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ValidationError("cannot create output directory " + dir.string() + ": " + ec.message());
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

int word_from_flag(const CorpusPair& corpus, const std::string& word) {
  int w = corpus.vocab().find(word);
  if (w < 0) {
    try {
      std::size_t used = 0;
      w = std::stoi(word, &used);
      if (used != word.size()) w = -1;
    } catch (...) {
      w = -1;
    }
  }
  if (w < 0 || w >= corpus.vocab_size()) throw ValidationError("word '" + word + "' is not in the vocabulary");
  return w;
}

CorpusPair select_split(const CorpusPair& corpus, const std::string& which, std::uint64_t seed) {
  if (which == "all" || which == "none") return corpus;
  DataSplit split = split_corpus(corpus, seed);
  if (which == "train") return std::move(split.train);
  if (which == "validation") return std::move(split.validation);
  if (which == "test") return std::move(split.test);
  throw ValidationError("unknown split '" + which + "'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Jointly dynamic topic models for lead-lag corpus pairs"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(LEADLAG_VERSION));
  unsigned threads_flag = 1;
  app.add_option("--threads", threads_flag, "worker threads (0 = all cores; LEADLAG_THREADS overrides)")
      ->capture_default_str();

  Run run;
  run.argv.assign(argv, argv + argc);
  std::string out_dir = ".";

  // generate
  GenConfig gen;
  int scenario = 1;
  auto* gen_cmd = app.add_subcommand("generate", "draw a synthetic corpus pair with ground truth");
  add_gen_options(gen_cmd, gen, scenario);
  gen_cmd->add_option("--out", out_dir, "output directory")->required();

  // fit
  ModelConfig fit_cfg;
  std::string corpus_path, vocab_path, method = "jdtm", split = "none";
  std::uint64_t split_seed = 1;
  auto* fit_cmd = app.add_subcommand("fit", "fit JDTM or a baseline");
  fit_cmd->add_option("--corpus", corpus_path)->required()->check(CLI::ExistingFile);
  fit_cmd->add_option("--vocab", vocab_path)->required()->check(CLI::ExistingFile);
  add_model_options(fit_cmd, fit_cfg);
  fit_cmd->add_option("--method", method, "jdtm, dtms or dtmc")->capture_default_str();
  fit_cmd->add_option("--split", split, "fit on: none (all documents) or train")
      ->check(CLI::IsMember({"none", "train"}))
      ->capture_default_str();
  fit_cmd->add_option("--split-seed", split_seed)->capture_default_str();
  fit_cmd->add_option("--out", out_dir)->required();

  // eval
  std::string model_path, eval_split = "test";
  auto* eval_cmd = app.add_subcommand("eval", "document-completion perplexity of a fitted model");
  eval_cmd->add_option("--model", model_path)->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--corpus", corpus_path)->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--vocab", vocab_path)->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--split", eval_split, "documents scored: test, validation or all")
      ->check(CLI::IsMember({"test", "validation", "all"}))
      ->capture_default_str();
  eval_cmd->add_option("--split-seed", split_seed)->capture_default_str();
  eval_cmd->add_option("--out", out_dir)->required();

  // select-lag
  ModelConfig sel_cfg;
  std::vector<int> lags{1, 2, 3, 4, 5};
  auto* select_cmd = app.add_subcommand("select-lag", "grid search over the lag on a validation split");
  select_cmd->add_option("--corpus", corpus_path)->required()->check(CLI::ExistingFile);
  select_cmd->add_option("--vocab", vocab_path)->required()->check(CLI::ExistingFile);
  add_model_options(select_cmd, sel_cfg);
  select_cmd->add_option("--lags", lags, "candidate lags")->delimiter(',')->capture_default_str();
  select_cmd->add_option("--split-seed", split_seed)->capture_default_str();
  select_cmd->add_option("--out", out_dir)->required();

  // diagnose-ccf
  std::vector<std::string> words;
  int max_lag = 5;
  auto* ccf_cmd = app.add_subcommand("diagnose-ccf", "lagged cross-correlation of word frequencies (lead vs lag)");
  ccf_cmd->add_option("--corpus", corpus_path)->required()->check(CLI::ExistingFile);
  ccf_cmd->add_option("--vocab", vocab_path)->required()->check(CLI::ExistingFile);
  ccf_cmd->add_option("--words", words, "tokens or word indices")->delimiter(',')->required();
  ccf_cmd->add_option("--max-lag", max_lag)->capture_default_str();
  ccf_cmd->add_option("--out", out_dir)->required();

  // diagnose-ccm
  CcmOptions ccm_opt;
  auto* ccm_cmd = app.add_subcommand("diagnose-ccm", "convergent cross mapping of word frequencies, both directions");
  ccm_cmd->add_option("--corpus", corpus_path)->required()->check(CLI::ExistingFile);
  ccm_cmd->add_option("--vocab", vocab_path)->required()->check(CLI::ExistingFile);
  ccm_cmd->add_option("--words", words, "tokens or word indices")->delimiter(',')->required();
  ccm_cmd->add_option("--E", ccm_opt.E, "embedding dimension")->capture_default_str();
  ccm_cmd->add_option("--tau", ccm_opt.tau, "embedding delay")->capture_default_str();
  ccm_cmd->add_option("--library-sizes", ccm_opt.library_sizes)->delimiter(',');
  ccm_cmd->add_option("--resamples", ccm_opt.resamples)->capture_default_str();
  ccm_cmd->add_option("--surrogates", ccm_opt.surrogates)->capture_default_str();
  ccm_cmd->add_option("--seed", ccm_opt.seed)->capture_default_str();
  ccm_cmd->add_option("--out", out_dir)->required();

  // report-top-words
  int topn = 7;
  std::string report_out;
  auto* report_cmd = app.add_subcommand("report-top-words", "top words of every topic and time slice");
  report_cmd->add_option("--model", model_path)->required()->check(CLI::ExistingFile);
  report_cmd->add_option("--topn", topn)->capture_default_str();
  report_cmd->add_option("--out", out_dir, "output directory (default: next to the model)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return 1;
  }

  const unsigned threads = resolve_threads(threads_flag);
  FitOptions fit_opt;
  fit_opt.threads = threads;
  run.threads = threads;

  try {
    if (gen_cmd->parsed()) {
      run.command = "generate";
      run.app = gen_cmd;
      gen.scenario = scenario == 1 ? Scenario::plain : Scenario::embedded;
      gen.validate();
      run.out_dir = out_dir;
      prepare_out_dir(run.out_dir);
      const SyntheticData data = generate(gen);
      {
        auto out = open_output(run, "corpus.jsonl");
        write_corpus(data.corpus, out);
      }
      write_vocabulary(data.corpus.vocab(), run.out_dir / "vocab.txt");
      run.outputs.push_back("vocab.txt");
      {
        auto out = open_output(run, "truth.json");
        ordered_json truth = to_json(data.truth);
        truth["generator"] = to_json(gen);
        out << truth.dump() << '\n';
      }
      run.extra["generator"] = to_json(gen);
      run.extra["documents"] = data.corpus.num_documents();
      run.extra["tokens"] = data.corpus.num_tokens();
    } else if (fit_cmd->parsed()) {
      run.command = "fit";
      run.app = fit_cmd;
      const Method m = method_from_string(method);
      fit_cfg.validate();
      run.out_dir = out_dir;
      prepare_out_dir(run.out_dir);
      const CorpusPair corpus = load_corpus(corpus_path, vocab_path);
      const CorpusPair train = select_split(corpus, split == "train" ? "train" : "all", split_seed);
      auto elbo_csv = open_output(run, "elbo.csv");
      elbo_csv << "sweep,elbo,seconds\n";
      fit_opt.on_sweep = [&](int sweep, double elbo, double seconds) {
        elbo_csv << sweep << ',' << fmt(elbo) << ',' << fmt(seconds) << '\n';
        std::cerr << "sweep " << sweep << "  elbo " << fmt(elbo) << '\n';
      };
      const FittedModel model = fit_method(train, fit_cfg, m, fit_opt);
      save_model(model, corpus.vocab(), run.out_dir / "model.json");
      run.outputs.push_back("model.json");
      run.extra["config"] = to_json(fit_cfg);
      run.extra["fitted_config"] = to_json(model.config);
      run.extra["sweeps"] = model.elbo_trace.size();
      run.extra["converged"] = model.converged;
      run.extra["line_search_warnings"] = model.line_search_warnings;
      run.extra["training_documents"] = train.num_documents();
    } else if (eval_cmd->parsed()) {
      run.command = "eval";
      run.app = eval_cmd;
      run.out_dir = out_dir;
      prepare_out_dir(run.out_dir);
      const LoadedModel loaded = load_model(model_path);
      const CorpusPair corpus = load_corpus(corpus_path, vocab_path);
      if (corpus.vocab().tokens() != loaded.vocab.tokens())
        throw ValidationError("corpus vocabulary differs from the model's vocabulary");
      const CorpusPair scored = select_split(corpus, eval_split, split_seed);
      const PerplexityReport report = completion_perplexity(loaded.model, scored, threads);
      {
        auto out = open_output(run, "perplexity.json");
        ordered_json j = to_json(report);
        j["method"] = loaded.model.method;
        j["lag"] = loaded.model.config.lag;
        out << j.dump(2) << '\n';
      }
      {
        auto out = open_output(run, "perplexity.csv");
        out << "method,corpus,lag,ppl\n" << perplexity_csv_rows(report, loaded.model.method, loaded.model.config.lag);
      }
      std::cout << "lead " << fmt(report.lead.perplexity()) << "  lag " << fmt(report.lag.perplexity()) << "  combined "
                << fmt(report.combined.perplexity()) << '\n';
    } else if (select_cmd->parsed()) {
      run.command = "select-lag";
      run.app = select_cmd;
      sel_cfg.validate();
      run.out_dir = out_dir;
      prepare_out_dir(run.out_dir);
      const CorpusPair corpus = load_corpus(corpus_path, vocab_path);
      const LagSelection sel = select_lag(corpus, sel_cfg, lags, split_seed, fit_opt);
      {
        auto out = open_output(run, "lag_selection.csv");
        out << "lag,ppl\n";
        for (const auto& s : sel.scores) out << s.lag << ',' << fmt(s.perplexity) << '\n';
      }
      {
        auto out = open_output(run, "lag_selection.json");
        ordered_json j;
        j["best_lag"] = sel.best_lag;
        auto scores = ordered_json::array();
        for (const auto& s : sel.scores)
          scores.push_back({{"lag", s.lag}, {"validation_lag_ppl", std::isfinite(s.perplexity) ? ordered_json(s.perplexity) : ordered_json(nullptr)}});
        j["scores"] = std::move(scores);
        out << j.dump(2) << '\n';
      }
      std::cout << "best lag " << sel.best_lag << '\n';
    } else if (ccf_cmd->parsed()) {
      run.command = "diagnose-ccf";
      run.app = ccf_cmd;
      run.out_dir = out_dir;
      prepare_out_dir(run.out_dir);
      const CorpusPair corpus = load_corpus(corpus_path, vocab_path);
      auto csv = open_output(run, "ccf.csv");
      csv << "word,lag,ccf,band_lo,band_hi\n";
      auto summary = ordered_json::array();
      for (const auto& word : words) {
        const int w = word_from_flag(corpus, word);
        const auto x = word_frequency_series(corpus, w, Side::lead);
        const auto y = word_frequency_series(corpus, w, Side::lag);
        const CcfResult r = lagged_ccf(x.values, y.values, max_lag);
        int best = 0;
        double best_v = -2.0;
        for (std::size_t i = 0; i < r.lags.size(); ++i) {
          const auto& c = r.coefficient[i];
          csv << corpus.vocab().token(w) << ',' << r.lags[i] << ',' << (c ? fmt(*c) : std::string()) << ','
              << fmt(-r.band) << ',' << fmt(r.band) << '\n';
          if (c && *c > best_v) {
            best_v = *c;
            best = r.lags[i];
          }
        }
        summary.push_back({{"word", corpus.vocab().token(w)},
                           {"peak_lag", best},
                           {"peak_ccf", best_v > -2.0 ? ordered_json(best_v) : ordered_json(nullptr)},
                           {"band", r.band}});
      }
      auto out = open_output(run, "ccf.json");
      ordered_json j;
      j["convention"] = "positive lag s correlates the leading series at t-s with the lagged series at t";
      j["words"] = std::move(summary);
      out << j.dump(2) << '\n';
    } else if (ccm_cmd->parsed()) {
      run.command = "diagnose-ccm";
      run.app = ccm_cmd;
      run.out_dir = out_dir;
      prepare_out_dir(run.out_dir);
      ccm_opt.threads = threads;
      const CorpusPair corpus = load_corpus(corpus_path, vocab_path);
      auto csv = open_output(run, "ccm_skill.csv");
      csv << "word,direction,library_size,rho_mean,rho_sd\n";
      auto rows = ordered_json::array();
      for (const auto& word : words) {
        const int w = word_from_flag(corpus, word);
        const auto lead = word_frequency_series(corpus, w, Side::lead);
        const auto lag = word_frequency_series(corpus, w, Side::lag);
        // x drives y is tested by cross-mapping x from the shadow manifold of y
        const std::pair<const char*, std::pair<const FrequencySeries*, const FrequencySeries*>> directions[] = {
            {"lead->lag", {&lead, &lag}}, {"lag->lead", {&lag, &lead}}};
        for (const auto& [name, series] : directions) {
          const SkillCurve curve = ccm(series.first->values, series.second->values, ccm_opt);
          for (std::size_t i = 0; i < curve.library_sizes.size(); ++i)
            csv << corpus.vocab().token(w) << ',' << name << ',' << curve.library_sizes[i] << ','
                << (std::isfinite(curve.rho_mean[i]) ? fmt(curve.rho_mean[i]) : std::string()) << ','
                << fmt(curve.rho_sd[i]) << '\n';
          rows.push_back({{"word", corpus.vocab().token(w)},
                          {"direction", name},
                          {"ccm", curve.unpredictable ? ordered_json(nullptr) : ordered_json(curve.terminal_rho)},
                          {"p_value", std::isfinite(curve.p_value) ? ordered_json(curve.p_value) : ordered_json(nullptr)},
                          {"unpredictable", curve.unpredictable},
                          {"no_skill", curve.no_skill}});
        }
      }
      auto out = open_output(run, "ccm.json");
      out << ordered_json{{"results", rows}}.dump(2) << '\n';
    } else if (report_cmd->parsed()) {
      run.command = "report-top-words";
      run.app = report_cmd;
      const LoadedModel loaded = load_model(model_path);
      run.out_dir = out_dir == "." && !report_cmd->count("--out") ? fs::path(model_path).parent_path() : fs::path(out_dir);
      if (run.out_dir.empty()) run.out_dir = ".";
      prepare_out_dir(run.out_dir);
      if (topn < 1) throw ValidationError("--topn must be at least 1");
      auto out = open_output(run, "top_words.csv");
      write_top_words_csv(top_words(loaded.model.chains, topn), loaded.vocab, out);
    }
    write_manifest(run);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
