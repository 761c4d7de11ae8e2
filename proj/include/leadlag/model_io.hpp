#pragma once

// Fitted-model files: one JSON document.
//
//   {"format": "leadlag-jdtm-model", "version": 1, "method": ..., "config": {...},
//    "horizon": T, "vocab": [...], "chains": [{type, k, t_start, alpha_hat,
//    m_tilde, V_tilde}], "elbo_trace": [...], "converged": bool}
//
// Doubles are written with the shortest representation that round-trips, so a
// load reproduces every stored value exactly. On load the smoothed moments are
// recomputed from alpha_hat and checked against the stored ones.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "leadlag/corpus.hpp"
#include "leadlag/error.hpp"
#include "leadlag/jdtm.hpp"

namespace leadlag {

inline constexpr const char* kModelFormat = "leadlag-jdtm-model";
inline constexpr int kModelVersion = 1;

inline nlohmann::ordered_json to_json(const ModelConfig& c) {
  nlohmann::ordered_json j;
  j["K"] = c.K;
  j["J"] = c.J;
  j["H"] = c.H;
  j["lag"] = c.lag;
  j["sigma2_shared"] = c.sigma2_shared;
  j["sigma2_lead"] = c.sigma2_lead;
  j["sigma2_lag"] = c.sigma2_lag;
  j["obs_variance_ratio"] = c.obs_variance_ratio;
  j["eta"] = c.eta;
  j["kappa"] = c.kappa;
  j["delta2_lead"] = c.delta2_lead;
  j["delta2_lag"] = c.delta2_lag;
  j["varpi2_lead"] = c.varpi2_lead;
  j["varpi2_lag"] = c.varpi2_lag;
  j["cg_max_iter"] = c.cg_max_iter;
  j["cg_tol"] = c.cg_tol;
  j["doc_max_iter"] = c.doc_max_iter;
  j["doc_tol"] = c.doc_tol;
  j["sweep_max"] = c.sweep_max;
  j["elbo_rel_tol"] = c.elbo_rel_tol;
  j["init_seed"] = c.init_seed;
  j["init_jitter"] = c.init_jitter;
  return j;
}

template <class Json>
ModelConfig model_config_from_json(const Json& j) {
  ModelConfig c;
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).template get<std::decay_t<decltype(field)>>();
  };
  get("K", c.K);
  get("J", c.J);
  get("H", c.H);
  get("lag", c.lag);
  get("sigma2_shared", c.sigma2_shared);
  get("sigma2_lead", c.sigma2_lead);
  get("sigma2_lag", c.sigma2_lag);
  get("obs_variance_ratio", c.obs_variance_ratio);
  get("eta", c.eta);
  get("kappa", c.kappa);
  get("delta2_lead", c.delta2_lead);
  get("delta2_lag", c.delta2_lag);
  get("varpi2_lead", c.varpi2_lead);
  get("varpi2_lag", c.varpi2_lag);
  get("cg_max_iter", c.cg_max_iter);
  get("cg_tol", c.cg_tol);
  get("doc_max_iter", c.doc_max_iter);
  get("doc_tol", c.doc_tol);
  get("sweep_max", c.sweep_max);
  get("elbo_rel_tol", c.elbo_rel_tol);
  get("init_seed", c.init_seed);
  get("init_jitter", c.init_jitter);
  c.validate();
  return c;
}

namespace detail {

inline nlohmann::ordered_json matrix_rows(const std::vector<double>& m, int rows, int cols) {
  auto out = nlohmann::ordered_json::array();
  for (int r = 0; r < rows; ++r)
    out.push_back(std::vector<double>(m.begin() + static_cast<std::ptrdiff_t>(r) * cols,
                                      m.begin() + static_cast<std::ptrdiff_t>(r + 1) * cols));
  return out;
}

inline std::vector<double> read_matrix(const nlohmann::json& j, int rows, int cols, const std::string& what) {
  if (!j.is_array() || static_cast<int>(j.size()) != rows)
    throw ValidationError("model file: " + what + " should have " + std::to_string(rows) + " rows");
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(rows) * cols);
  for (const auto& row : j) {
    if (!row.is_array() || static_cast<int>(row.size()) != cols)
      throw ValidationError("model file: " + what + " row should have " + std::to_string(cols) + " entries");
    for (const auto& x : row) out.push_back(x.get<double>());
  }
  return out;
}

}  // namespace detail

/// The model as JSON. The vocabulary is stored so reports are self-contained.
inline nlohmann::ordered_json model_to_json(const FittedModel& m, const Vocabulary& vocab) {
  nlohmann::ordered_json j;
  j["format"] = kModelFormat;
  j["version"] = kModelVersion;
  j["method"] = m.method;
  j["config"] = to_json(m.config);
  j["horizon"] = m.horizon;
  j["vocab"] = vocab.tokens();
  auto chains = nlohmann::ordered_json::array();
  for (const auto& c : m.chains) {
    nlohmann::ordered_json cj;
    cj["type"] = std::string(to_string(c.type));
    cj["k"] = c.index;
    cj["t_start"] = c.t_start;
    cj["alpha_hat"] = detail::matrix_rows(c.alpha_hat, c.length, c.vocab);
    cj["m_tilde"] = detail::matrix_rows(c.m_tilde, c.length, c.vocab);
    cj["V_tilde"] = detail::matrix_rows(c.V_tilde, c.length, c.vocab);
    chains.push_back(std::move(cj));
  }
  j["chains"] = std::move(chains);
  j["elbo_trace"] = m.elbo_trace;
  j["converged"] = m.converged;
  return j;
}

struct LoadedModel {
  FittedModel model;
  Vocabulary vocab;
};

inline LoadedModel model_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("format") || j.at("format") != kModelFormat)
    throw ValidationError("not a leadlag model file (missing or wrong format tag)");
  if (!j.contains("version") || j.at("version") != kModelVersion)
    throw ValidationError("unsupported model file version " + (j.contains("version") ? j.at("version").dump() : "?") +
                          " (expected " + std::to_string(kModelVersion) + ")");
  try {
    LoadedModel out;
    FittedModel& m = out.model;
    m.config = model_config_from_json(j.at("config"));
    m.method = j.at("method").get<std::string>();
    m.horizon = j.at("horizon").get<int>();
    out.vocab = Vocabulary(j.at("vocab").get<std::vector<std::string>>());
    m.vocab = out.vocab.size();
    m.elbo_trace = j.at("elbo_trace").get<std::vector<double>>();
    m.converged = j.at("converged").get<bool>();

    std::vector<TopicChain> expected = make_chains(m.config, m.horizon, m.vocab);
    const auto& chains = j.at("chains");
    if (!chains.is_array() || chains.size() != expected.size())
      throw ValidationError("model file: expected " + std::to_string(expected.size()) + " chains for the stored config");
    for (std::size_t c = 0; c < expected.size(); ++c) {
      TopicChain& chain = expected[c];
      const auto& cj = chains[c];
      if (topic_type_from_string(cj.at("type").get<std::string>()) != chain.type ||
          cj.at("k").get<int>() != chain.index || cj.at("t_start").get<int>() != chain.t_start)
        throw ValidationError("model file: chain " + std::to_string(c) + " does not match the stored config");
      chain.alpha_hat = detail::read_matrix(cj.at("alpha_hat"), chain.length, chain.vocab, "alpha_hat");
      const auto m_tilde = detail::read_matrix(cj.at("m_tilde"), chain.length, chain.vocab, "m_tilde");
      const auto V_tilde = detail::read_matrix(cj.at("V_tilde"), chain.length, chain.vocab, "V_tilde");
      chain.refresh();
      for (std::size_t i = 0; i < m_tilde.size(); ++i)
        if (std::abs(m_tilde[i] - chain.m_tilde[i]) > 1e-9 * (1.0 + std::abs(m_tilde[i])) ||
            std::abs(V_tilde[i] - chain.V_tilde[i]) > 1e-9 * (1.0 + std::abs(V_tilde[i])))
          throw ValidationError("model file: chain " + std::to_string(c) +
                                " smoothed moments are inconsistent with alpha_hat");
    }
    m.chains = std::move(expected);
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("model file: bad or missing field: ") + e.what());
  }
}

inline void save_model(const FittedModel& m, const Vocabulary& vocab, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << model_to_json(m, vocab).dump() << '\n';
  if (!out) throw Error("failed writing " + path.string());
}

inline LoadedModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open model file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(buf.str());
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("model file " + path.string() + " is truncated or malformed: " + e.what());
  }
  return model_from_json(j);
}

}  // namespace leadlag
