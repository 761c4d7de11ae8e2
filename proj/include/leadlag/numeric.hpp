#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

namespace leadlag::numeric {

inline constexpr double kProbFloor = 1e-300;
inline constexpr double kDigammaClamp = 1e-6;

/// Digamma function. Arguments below 1e-6 are clamped; the recurrence lifts
/// the argument past 10 where the asymptotic series is accurate to ~1e-13.
inline double digamma(double x) {
  x = std::max(x, kDigammaClamp);
  double result = 0.0;
  while (x < 10.0) {
    result -= 1.0 / x;
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  // Bernoulli-number tail: 1/12, 1/120, 1/252, 1/240, 1/132, 691/32760
  const double tail =
      inv2 * (1.0 / 12 -
              inv2 * (1.0 / 120 -
                      inv2 * (1.0 / 252 -
                              inv2 * (1.0 / 240 - inv2 * (1.0 / 132 - inv2 * 691.0 / 32760)))));
  return result + std::log(x) - 0.5 * inv - tail;
}

inline double safe_log(double p) { return std::log(std::max(p, kProbFloor)); }

inline double log_sum_exp(std::span<const double> xs) {
  if (xs.empty()) return -std::numeric_limits<double>::infinity();
  const double mx = *std::max_element(xs.begin(), xs.end());
  if (!std::isfinite(mx)) return mx;
  double acc = 0.0;
  for (double x : xs) acc += std::exp(x - mx);
  return mx + std::log(acc);
}

/// In-place softmax with max subtraction.
inline void softmax_inplace(std::span<double> xs) {
  if (xs.empty()) return;
  const double mx = *std::max_element(xs.begin(), xs.end());
  double acc = 0.0;
  for (double& x : xs) {
    x = std::exp(x - mx);
    acc += x;
  }
  for (double& x : xs) x /= acc;
}

inline std::vector<double> softmax(std::span<const double> xs) {
  std::vector<double> out(xs.begin(), xs.end());
  softmax_inplace(out);
  return out;
}

inline double mean(std::span<const double> xs) {
  double acc = 0.0;
  for (double x : xs) acc += x;
  return xs.empty() ? 0.0 : acc / static_cast<double>(xs.size());
}

/// Pearson correlation; empty when either side has zero variance.
inline std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = std::min(x.size(), y.size());
  if (n < 2) return std::nullopt;
  const double mx = mean(x.first(n));
  const double my = mean(y.first(n));
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) return std::nullopt;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

/// Jensen-Shannon divergence in nats.
inline double js_divergence(std::span<const double> p, std::span<const double> q) {
  double js = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double m = 0.5 * (p[i] + q[i]);
    if (p[i] > 0.0) js += 0.5 * p[i] * std::log(p[i] / m);
    if (q[i] > 0.0) js += 0.5 * q[i] * std::log(q[i] / m);
  }
  return js;
}

}  // namespace leadlag::numeric
