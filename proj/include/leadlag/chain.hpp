#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "leadlag/error.hpp"
#include "leadlag/kalman.hpp"
#include "leadlag/numeric.hpp"

namespace leadlag {

enum class TopicType { shared, lead_specific, lag_specific };

inline std::string_view to_string(TopicType t) {
  switch (t) {
    case TopicType::shared: return "shared";
    case TopicType::lead_specific: return "lead_specific";
    case TopicType::lag_specific: return "lag_specific";
  }
  return "?";
}

inline TopicType topic_type_from_string(std::string_view s) {
  if (s == "shared") return TopicType::shared;
  if (s == "lead_specific") return TopicType::lead_specific;
  if (s == "lag_specific") return TopicType::lag_specific;
  throw ValidationError("unknown topic type '" + std::string(s) + "'");
}

/// Expected word counts attributed to one chain, n[s][v] and n_s = sum_v n[s][v].
/// Rows follow the chain's own time span.
struct ChainCounts {
  int length = 0;
  int vocab = 0;
  std::vector<double> n;
  std::vector<double> totals;

  ChainCounts() = default;
  ChainCounts(int length_, int vocab_)
      : length(length_),
        vocab(vocab_),
        n(static_cast<std::size_t>(length_) * static_cast<std::size_t>(vocab_), 0.0),
        totals(static_cast<std::size_t>(length_), 0.0) {}

  double& at(int row, int v) { return n[static_cast<std::size_t>(row) * vocab + v]; }
  double at(int row, int v) const { return n[static_cast<std::size_t>(row) * vocab + v]; }

  void add(int row, int v, double amount) {
    at(row, v) += amount;
    totals[static_cast<std::size_t>(row)] += amount;
  }
};

inline std::uint64_t checksum(std::span<const double> values) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (double x : values) {
    std::uint64_t bits;
    std::memcpy(&bits, &x, sizeof bits);
    h = (h ^ bits) * 0x100000001b3ULL;
  }
  return h;
}

/// One topic trajectory in natural-parameter space. Matrices are row-major
/// [row][v] where row r corresponds to chain time t_start + r.
struct TopicChain {
  TopicType type = TopicType::shared;
  int index = 0;
  int t_start = 1;
  int length = 0;
  int vocab = 0;
  double sigma2 = 1.0;
  double obs_var = 10.0;

  std::vector<double> alpha_hat;
  std::vector<double> m_fwd, v_fwd;
  std::vector<double> m_tilde, V_tilde;
  std::vector<double> anchor_mean;  // smoothed mean one step before t_start
  std::vector<double> zeta;         // per row
  std::uint64_t moments_checksum = 0;

  TopicChain() = default;
  TopicChain(TopicType type_, int index_, int t_start_, int length_, int vocab_, double sigma2_,
             double obs_var_)
      : type(type_), index(index_), t_start(t_start_), length(length_), vocab(vocab_),
        sigma2(sigma2_), obs_var(obs_var_),
        alpha_hat(cells(), 0.0) {}

  std::size_t cells() const { return static_cast<std::size_t>(length) * static_cast<std::size_t>(vocab); }
  int t_end() const { return t_start + length - 1; }
  bool covers(int chain_time) const { return chain_time >= t_start && chain_time <= t_end(); }

  int row(int chain_time) const {
    if (!covers(chain_time))
      throw ValidationError(std::string(to_string(type)) + " chain " + std::to_string(index) +
                            " has no slice at time " + std::to_string(chain_time));
    return chain_time - t_start;
  }

  std::span<const double> mean_row(int r) const {
    return std::span<const double>(m_tilde).subspan(static_cast<std::size_t>(r) * vocab, vocab);
  }

  double log_zeta(int r) const { return std::log(zeta[static_cast<std::size_t>(r)]); }

  /// softmax of the smoothed mean at row r.
  std::vector<double> word_distribution(int r) const {
    auto row = mean_row(r);
    return numeric::softmax(row);
  }

  SmootherGains gains() const { return SmootherGains(length, sigma2, obs_var); }

  /// Recomputes smoothed moments and zeta from alpha_hat.
  void refresh() { refresh(gains()); }

  void refresh(const SmootherGains& g) {
    const std::size_t n = cells();
    m_fwd.resize(n);
    m_tilde.resize(n);
    anchor_mean.resize(static_cast<std::size_t>(vocab));
    g.smooth(alpha_hat, vocab, m_fwd, m_tilde, anchor_mean);
    v_fwd.resize(n);
    V_tilde.resize(n);
    for (int r = 0; r < length; ++r)
      for (int v = 0; v < vocab; ++v) {
        v_fwd[static_cast<std::size_t>(r) * vocab + v] = g.v_fwd[r + 1];
        V_tilde[static_cast<std::size_t>(r) * vocab + v] = g.V_tilde[r + 1];
      }
    zeta.assign(static_cast<std::size_t>(length), 0.0);
    for (int r = 0; r < length; ++r) {
      double acc = 0.0;
      for (int v = 0; v < vocab; ++v) {
        const std::size_t i = static_cast<std::size_t>(r) * vocab + v;
        acc += std::exp(m_tilde[i] + 0.5 * V_tilde[i]);
      }
      zeta[static_cast<std::size_t>(r)] = acc;
    }
    moments_checksum = checksum(alpha_hat);
  }

  bool moments_current() const {
    return m_tilde.size() == cells() && zeta.size() == static_cast<std::size_t>(length) &&
           moments_checksum == checksum(alpha_hat);
  }
};

// ---------------------------------------------------------------------------
// Chain bound
//
// For fixed counts the chain contributes
//
//   -1/(2 sigma2) sum_s sum_v E[(beta_s - beta_{s-1})^2]
//   + sum_s [ sum_v n_{s,v} m_{s,v} - n_s log zeta_s ] + H(q(beta))
//
// with zeta_s = sum_v exp(m_{s,v} + V_s / 2) at its optimum. Only the mean
// part of the drift and the likelihood part depend on alpha_hat; the rest is
// a constant of (S, sigma2, obs_var, V).

/// Terms of the chain bound that do not depend on alpha_hat.
inline double chain_constant_terms(const SmootherGains& g, int vocab) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double per_word = 0.0;
  for (int s = 1; s <= g.length; ++s) {
    const double cross = g.back[s - 1] * g.V_tilde[s];
    const double var_part = g.V_tilde[s] + g.V_tilde[s - 1] - 2.0 * cross;
    per_word += -0.5 * std::log(two_pi * g.sigma2) - var_part / (2.0 * g.sigma2);
  }
  for (int s = 0; s <= g.length; ++s) per_word += 0.5 * std::log(two_pi * std::numbers::e * g.cond_var[s]);
  return per_word * vocab;
}

/// Evaluates the alpha_hat-dependent part of the chain bound (zeta at its
/// optimum) and, optionally, its exact gradient with respect to alpha_hat.
/// The same quantity can be evaluated directly from the smoothed means, which
/// are a linear, invertible image of alpha_hat.
class ChainObjective {
 public:
  ChainObjective(const TopicChain& chain, const ChainCounts& counts)
      : gains_(chain.length, chain.sigma2, chain.obs_var), counts_(counts),
        S_(chain.length), V_(chain.vocab) {
    if (counts.length != S_ || counts.vocab != V_)
      throw ValidationError("count tensor shape does not match chain");
    m_fwd_.resize(chain.cells());
    m_tilde_.resize(chain.cells());
    anchor_.resize(static_cast<std::size_t>(V_));
    dm_.resize(static_cast<std::size_t>(S_ + 1) * V_);
    logits_.resize(static_cast<std::size_t>(V_));
  }

  const SmootherGains& gains() const { return gains_; }

  double value(std::span<const double> alpha) { return evaluate(alpha, {}); }

  /// Returns F(alpha); fills grad (same shape as alpha) when non-empty.
  double evaluate(std::span<const double> alpha, std::span<double> grad) {
    const auto V = static_cast<std::size_t>(V_);
    const auto S = static_cast<std::size_t>(S_);
    gains_.smooth(alpha, V_, m_fwd_, m_tilde_, anchor_);
    const double f = core(m_tilde_, !grad.empty());
    if (!grad.empty()) {
      // chain rule through the linear smoother: grad_t = sum_s J[s][t] dF/dm_s
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t t = 0; t < S; ++t) {
        double* g = &grad[t * V];
        for (std::size_t s = 0; s <= S; ++s) {
          const double j = gains_.jac(static_cast<int>(s), static_cast<int>(t));
          if (j == 0.0) continue;
          const double* d = &dm_[s * V];
          for (std::size_t v = 0; v < V; ++v) g[v] += j * d[v];
        }
      }
    }
    return f;
  }

  /// F as a function of the smoothed means m_1..S (the anchor follows from
  /// m_1); fills the gradient with respect to those means when non-empty.
  double evaluate_means(std::span<const double> m, std::span<double> grad) {
    const auto V = static_cast<std::size_t>(V_);
    for (std::size_t v = 0; v < V; ++v) anchor_[v] = gains_.back[0] * m[v];
    const double f = core(m, !grad.empty());
    if (!grad.empty()) {
      std::copy(dm_.begin() + static_cast<std::ptrdiff_t>(V), dm_.end(), grad.begin());
      for (std::size_t v = 0; v < V; ++v) grad[v] += gains_.back[0] * dm_[v];
    }
    return f;
  }

 private:
  /// Drift and likelihood parts given means and anchor_; dm_ receives
  /// dF/d(anchor, m_1..S) when asked.
  double core(std::span<const double> m, bool want_grad) {
    const auto V = static_cast<std::size_t>(V_);
    const auto S = static_cast<std::size_t>(S_);
    const double inv_s2 = 1.0 / gains_.sigma2;
    double drift = 0.0;
    double lik = 0.0;
    if (want_grad) std::fill(dm_.begin(), dm_.end(), 0.0);

    for (std::size_t s = 0; s < S; ++s) {
      const double* cur = &m[s * V];
      const double* prev = s == 0 ? anchor_.data() : &m[(s - 1) * V];
      double* d_cur = want_grad ? &dm_[(s + 1) * V] : nullptr;
      double* d_prev = want_grad ? &dm_[s * V] : nullptr;
      for (std::size_t v = 0; v < V; ++v) {
        const double diff = cur[v] - prev[v];
        drift += diff * diff;
        if (want_grad) {
          d_cur[v] -= inv_s2 * diff;
          d_prev[v] += inv_s2 * diff;
        }
      }
      const double half_var = 0.5 * gains_.V_tilde[s + 1];
      for (std::size_t v = 0; v < V; ++v) logits_[v] = cur[v] + half_var;
      const double lse = numeric::log_sum_exp(logits_);
      const double total = counts_.totals[s];
      const double* n = &counts_.n[s * V];
      for (std::size_t v = 0; v < V; ++v) lik += n[v] * cur[v];
      lik -= total * lse;
      if (want_grad)
        for (std::size_t v = 0; v < V; ++v) d_cur[v] += n[v] - total * std::exp(logits_[v] - lse);
    }
    return -0.5 * inv_s2 * drift + lik;
  }

  SmootherGains gains_;
  const ChainCounts& counts_;
  int S_, V_;
  std::vector<double> m_fwd_, m_tilde_, anchor_, dm_, logits_;
};

struct ChainBound {
  double value = 0.0;
  std::vector<double> gradient;  // same layout as alpha_hat
  double drift = 0.0;            // mean part of the drift term
  double likelihood = 0.0;
  double constant = 0.0;
};

/// Full chain contribution to the ELBO, evaluated from the chain's stored
/// moments and zeta, and the gradient with respect to alpha_hat.
inline ChainBound chain_elbo_and_gradient(const TopicChain& chain, const ChainCounts& counts) {
  if (!chain.moments_current())
    throw ValidationError(std::string(to_string(chain.type)) + " chain " + std::to_string(chain.index) +
                          ": smoothed moments are stale (alpha_hat changed since last refresh)");
  if (counts.length != chain.length || counts.vocab != chain.vocab)
    throw ValidationError("count tensor shape does not match chain");
  const SmootherGains g = chain.gains();
  const auto V = static_cast<std::size_t>(chain.vocab);
  const auto S = static_cast<std::size_t>(chain.length);
  const double inv_s2 = 1.0 / chain.sigma2;

  ChainBound out;
  std::vector<double> dm((S + 1) * V, 0.0);
  for (std::size_t s = 0; s < S; ++s) {
    const double* cur = &chain.m_tilde[s * V];
    const double* prev = s == 0 ? chain.anchor_mean.data() : &chain.m_tilde[(s - 1) * V];
    const double z = chain.zeta[s];
    const double total = counts.totals[s];
    double expsum = 0.0;
    for (std::size_t v = 0; v < V; ++v) {
      const double diff = cur[v] - prev[v];
      out.drift += diff * diff;
      dm[(s + 1) * V + v] -= inv_s2 * diff;
      dm[s * V + v] += inv_s2 * diff;
      const double e = std::exp(cur[v] + 0.5 * chain.V_tilde[s * V + v]);
      expsum += e;
      out.likelihood += counts.n[s * V + v] * cur[v];
      dm[(s + 1) * V + v] += counts.n[s * V + v] - total * e / z;
    }
    out.likelihood -= total * (expsum / z - 1.0 + std::log(z));
  }
  out.drift *= -0.5 * inv_s2;
  out.constant = chain_constant_terms(g, chain.vocab);
  out.value = out.drift + out.likelihood + out.constant;

  out.gradient.assign(S * V, 0.0);
  for (std::size_t t = 0; t < S; ++t)
    for (std::size_t s = 0; s <= S; ++s) {
      const double j = g.jac(static_cast<int>(s), static_cast<int>(t));
      for (std::size_t v = 0; v < V; ++v) out.gradient[t * V + v] += j * dm[s * V + v];
    }
  return out;
}

// ---------------------------------------------------------------------------
// Conjugate-gradient update

struct CgOptions {
  int max_iter = 15;
  double rel_tol = 1e-4;
  double armijo = 1e-4;
  double shrink = 0.5;
  int max_backtracks = 50;
};

struct ChainUpdate {
  TopicChain chain;
  int iterations = 0;
  bool line_search_failed = false;
  double objective_before = 0.0;
  double objective_after = 0.0;
};

/// Polak-Ribiere conjugate gradient on -F with Armijo backtracking. The
/// iteration runs on the smoothed means, an invertible linear image of
/// alpha_hat, with a diagonal preconditioner from the curvature of the word
/// likelihood and the drift; alpha_hat is recovered by inverting the
/// smoother. The objective never decreases; moments and zeta are refreshed
/// on return.
inline ChainUpdate update_chain(TopicChain chain, const ChainCounts& counts, const CgOptions& opt = {}) {
  if (!chain.moments_current()) chain.refresh();
  ChainObjective objective(chain, counts);
  const SmootherGains& g = objective.gains();
  const std::size_t n = chain.cells();
  const auto V = static_cast<std::size_t>(chain.vocab);
  const auto S = static_cast<std::size_t>(chain.length);
  std::vector<double> x = chain.m_tilde;
  std::vector<double> grad(n), grad_new(n), z(n), z_new(n), dir(n), trial(n);

  auto dot = [](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
  };
  auto max_abs = [](const std::vector<double>& v) {
    double m = 0.0;
    for (double e : v) m = std::max(m, std::abs(e));
    return m;
  };

  // minimise f = -F
  double f = -objective.evaluate_means(x, grad);
  for (double& gi : grad) gi = -gi;

  ChainUpdate out;
  out.objective_before = -f;
  if (!std::isfinite(f)) throw NumericError("chain objective is not finite before update");

  // diagonal curvature: n_s p_{s,v} from the likelihood plus the drift coupling
  std::vector<double> precond(n);
  {
    const double drift_curv = 2.0 / chain.sigma2;
    std::vector<double> p(V);
    for (std::size_t s = 0; s < S; ++s) {
      for (std::size_t v = 0; v < V; ++v) p[v] = x[s * V + v];
      numeric::softmax_inplace(p);
      for (std::size_t v = 0; v < V; ++v) precond[s * V + v] = counts.totals[s] * p[v] + drift_curv;
    }
  }
  auto apply_precond = [&](const std::vector<double>& r, std::vector<double>& out_z) {
    for (std::size_t i = 0; i < n; ++i) out_z[i] = r[i] / precond[i];
  };

  constexpr double kMaxMove = 10.0;  // cap on |change| of any mean per trial step
  const double grad_floor = 1e-12 * std::max(1.0, std::abs(f));
  apply_precond(grad, z);
  for (std::size_t i = 0; i < n; ++i) dir[i] = -z[i];
  const long restart_every = static_cast<long>(n);
  long since_restart = 0;

  if (max_abs(grad) > grad_floor) {
    for (int iter = 1; iter <= opt.max_iter; ++iter) {
      out.iterations = iter;
      double slope = dot(grad, dir);
      if (!(slope < 0.0)) {
        for (std::size_t i = 0; i < n; ++i) dir[i] = -z[i];
        slope = dot(grad, dir);
        since_restart = 0;
        if (!(slope < 0.0)) break;
      }
      const double dir_max = max_abs(dir);
      if (!(dir_max > 0.0)) break;
      double step = std::min(1.0, kMaxMove / dir_max);
      bool accepted = false;
      double f_new = f;
      for (int bt = 0; bt < opt.max_backtracks; ++bt) {
        for (std::size_t i = 0; i < n; ++i) trial[i] = x[i] + step * dir[i];
        f_new = -objective.evaluate_means(trial, {});
        if (std::isfinite(f_new) && f_new <= f + opt.armijo * step * slope) {
          accepted = true;
          break;
        }
        step *= opt.shrink;
      }
      if (!accepted) {
        out.line_search_failed = true;
        break;
      }
      x.swap(trial);
      const double rel_change = (f - f_new) / std::max(1.0, std::abs(f));
      f = -objective.evaluate_means(x, grad_new);
      for (double& gi : grad_new) gi = -gi;
      apply_precond(grad_new, z_new);

      double beta = 0.0;
      if (++since_restart < restart_every) {
        double num = 0.0;
        for (std::size_t i = 0; i < n; ++i) num += grad_new[i] * (z_new[i] - z[i]);
        const double den = dot(grad, z);
        beta = den > 0.0 ? std::max(0.0, num / den) : 0.0;
      } else {
        since_restart = 0;
      }
      for (std::size_t i = 0; i < n; ++i) dir[i] = -z_new[i] + beta * dir[i];
      grad.swap(grad_new);
      z.swap(z_new);
      if (rel_change < opt.rel_tol || max_abs(grad) <= grad_floor) break;
    }
  }

  if (out.iterations > 0) g.unsmooth(x, chain.vocab, chain.alpha_hat);
  chain.refresh(g);
  out.objective_after = objective.value(chain.alpha_hat);
  out.chain = std::move(chain);
  return out;
}

}  // namespace leadlag
