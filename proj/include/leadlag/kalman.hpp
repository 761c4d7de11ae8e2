#pragma once

// Forward-backward smoothing of the Gaussian random-walk variational family
//
//   beta_0 ~ N(0, v0),   beta_s | beta_{s-1} ~ N(beta_{s-1}, sigma2),
//   alpha_hat_s | beta_s ~ N(beta_s, obs_var),          s = 1..S
//
// with the diffuse start v0 = 1e3 * sigma2. The state at s = 0 is an anchor
// without an observation; its smoothed mean enters the drift term of the
// chain bound. Variances and gains do not depend on the observations, so they
// are computed once per (S, sigma2, obs_var) and shared by every word.

#include <cstddef>
#include <span>
#include <vector>

#include "leadlag/error.hpp"

namespace leadlag {

inline constexpr double kDiffuseMultiplier = 1e3;

/// Observation-independent quantities of the smoother. Arrays indexed by
/// state s = 0..S (0 is the anchor).
struct SmootherGains {
  int length = 0;
  double sigma2 = 1.0;
  double obs_var = 10.0;
  std::vector<double> gain;      // Kalman gain, s = 1..S (gain[0] = 0)
  std::vector<double> v_fwd;     // filtered variance
  std::vector<double> back;      // RTS gain v_s / (v_s + sigma2), s = 0..S-1
  std::vector<double> V_tilde;   // smoothed variance
  std::vector<double> cond_var;  // Var(beta_s | beta_{s+1}, obs_1..s), Var(beta_S | all) at S
  /// d m_tilde_s / d alpha_hat_t, row-major (S+1) x S; row 0 is the anchor.
  std::vector<double> jacobian;

  SmootherGains() = default;

  SmootherGains(int S, double sigma2_, double obs_var_) : length(S), sigma2(sigma2_), obs_var(obs_var_) {
    if (S < 1) throw ValidationError("smoother needs at least one time step");
    if (!(sigma2 > 0.0) || !(obs_var > 0.0))
      throw ValidationError("smoother variances must be positive");
    const auto n = static_cast<std::size_t>(S + 1);
    gain.assign(n, 0.0);
    v_fwd.assign(n, 0.0);
    back.assign(n, 0.0);
    V_tilde.assign(n, 0.0);
    cond_var.assign(n, 0.0);
    v_fwd[0] = kDiffuseMultiplier * sigma2;
    for (int s = 1; s <= S; ++s) {
      const double v_pred = v_fwd[s - 1] + sigma2;
      gain[s] = v_pred / (v_pred + obs_var);
      v_fwd[s] = (1.0 - gain[s]) * v_pred;
    }
    V_tilde[S] = v_fwd[S];
    cond_var[S] = v_fwd[S];
    for (int s = S - 1; s >= 0; --s) {
      const double v_pred = v_fwd[s] + sigma2;
      back[s] = v_fwd[s] / v_pred;
      V_tilde[s] = v_fwd[s] + back[s] * back[s] * (V_tilde[s + 1] - v_pred);
      cond_var[s] = v_fwd[s] * sigma2 / v_pred;
    }

    jacobian.assign(n * static_cast<std::size_t>(S), 0.0);
    std::vector<double> unit(static_cast<std::size_t>(S), 0.0), m_fwd(unit.size()), m_tilde(unit.size());
    double anchor = 0.0;
    for (int t = 0; t < S; ++t) {
      unit.assign(unit.size(), 0.0);
      unit[static_cast<std::size_t>(t)] = 1.0;
      smooth(unit, 1, m_fwd, m_tilde, std::span<double>(&anchor, 1));
      jacobian[static_cast<std::size_t>(t)] = anchor;
      for (int s = 1; s <= S; ++s)
        jacobian[static_cast<std::size_t>(s) * S + t] = m_tilde[static_cast<std::size_t>(s - 1)];
    }
  }

  double jac(int s, int t) const {
    return jacobian[static_cast<std::size_t>(s) * static_cast<std::size_t>(length) + static_cast<std::size_t>(t)];
  }

  /// Smooths `words` independent series stored row-major as alpha[s][w],
  /// s = 1..S mapped to rows 0..S-1. anchor receives the smoothed s = 0 mean.
  void smooth(std::span<const double> alpha, int words, std::span<double> m_fwd,
              std::span<double> m_tilde, std::span<double> anchor) const {
    const auto W = static_cast<std::size_t>(words);
    const auto S = static_cast<std::size_t>(length);
    for (std::size_t w = 0; w < W; ++w) {
      double prev = 0.0;
      for (std::size_t s = 0; s < S; ++s) {
        const double g = gain[s + 1];
        prev = prev + g * (alpha[s * W + w] - prev);
        m_fwd[s * W + w] = prev;
      }
    }
    for (std::size_t w = 0; w < W; ++w) m_tilde[(S - 1) * W + w] = m_fwd[(S - 1) * W + w];
    for (std::size_t s = S - 1; s-- > 0;) {
      const double c = back[s + 1];
      for (std::size_t w = 0; w < W; ++w) {
        const double m = m_fwd[s * W + w];
        m_tilde[s * W + w] = m + c * (m_tilde[(s + 1) * W + w] - m);
      }
    }
    for (std::size_t w = 0; w < W; ++w) anchor[w] = back[0] * m_tilde[w];
  }

  /// Inverse of smooth(): the observations that produce the given smoothed
  /// means. Both recursions are bidiagonal, so they are undone row by row.
  void unsmooth(std::span<const double> m_tilde, int words, std::span<double> alpha) const {
    const auto W = static_cast<std::size_t>(words);
    const auto S = static_cast<std::size_t>(length);
    std::vector<double> m_fwd(m_tilde.begin(), m_tilde.begin() + static_cast<std::ptrdiff_t>(S * W));
    for (std::size_t s = 0; s + 1 < S; ++s) {
      const double c = back[s + 1];
      for (std::size_t w = 0; w < W; ++w) m_fwd[s * W + w] = (m_tilde[s * W + w] - c * m_tilde[(s + 1) * W + w]) / (1.0 - c);
    }
    for (std::size_t s = 0; s < S; ++s) {
      const double g = gain[s + 1];
      for (std::size_t w = 0; w < W; ++w) {
        const double prev = s == 0 ? 0.0 : m_fwd[(s - 1) * W + w];
        alpha[s * W + w] = prev + (m_fwd[s * W + w] - prev) / g;
      }
    }
  }
};

/// Moments of one smoothed series; vectors are indexed s = 1..S at 0..S-1.
struct KalmanMoments {
  std::vector<double> m_fwd, v_fwd, m_tilde, V_tilde;
  double anchor_mean = 0.0;
  double anchor_var = 0.0;
};

inline KalmanMoments kalman_smooth(std::span<const double> alpha_hat, double sigma2, double obs_var) {
  const SmootherGains gains(static_cast<int>(alpha_hat.size()), sigma2, obs_var);
  KalmanMoments out;
  const std::size_t S = alpha_hat.size();
  out.m_fwd.resize(S);
  out.m_tilde.resize(S);
  gains.smooth(alpha_hat, 1, out.m_fwd, out.m_tilde, std::span<double>(&out.anchor_mean, 1));
  out.v_fwd.assign(gains.v_fwd.begin() + 1, gains.v_fwd.end());
  out.V_tilde.assign(gains.V_tilde.begin() + 1, gains.V_tilde.end());
  out.anchor_var = gains.V_tilde[0];
  return out;
}

}  // namespace leadlag
