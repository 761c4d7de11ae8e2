#pragma once

#include <random>
#include <utility>
#include <vector>

#include "leadlag/random.hpp"

namespace leadlag::testing {

/// Coupled logistic maps where x drives y:
///   x_{t+1} = x_t (3.8 - 3.8 x_t),  y_{t+1} = y_t (3.5 - 3.5 y_t - 0.1 x_t).
/// Initial values are drawn from the seed; the first `burn` steps are dropped.
inline std::pair<std::vector<double>, std::vector<double>> coupled_logistic(int n, std::uint64_t seed, int burn = 100) {
  Rng rng = make_rng(seed, {0x10915});
  std::uniform_real_distribution<double> u(0.1, 0.9);
  double x = u(rng), y = u(rng);
  std::vector<double> xs, ys;
  for (int t = 0; t < n + burn; ++t) {
    if (t >= burn) {
      xs.push_back(x);
      ys.push_back(y);
    }
    const double xn = x * (3.8 - 3.8 * x);
    const double yn = y * (3.5 - 3.5 * y - 0.1 * x);
    x = xn;
    y = yn;
  }
  return {xs, ys};
}

inline std::vector<double> uniform_noise(int n, std::uint64_t seed, std::uint64_t stream) {
  Rng rng = make_rng(seed, {0x4015e, stream});
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> out(static_cast<std::size_t>(n));
  for (double& v : out) v = u(rng);
  return out;
}

inline std::vector<double> gaussian_noise(int n, Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> out(static_cast<std::size_t>(n));
  for (double& v : out) v = g(rng);
  return out;
}

}  // namespace leadlag::testing
