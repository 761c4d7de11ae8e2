#pragma once

// Model-free lead-lag diagnostics on word-frequency series: lagged
// cross-correlation and convergent cross mapping (CCM) with circular-shift
// surrogates.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "leadlag/corpus.hpp"
#include "leadlag/error.hpp"
#include "leadlag/numeric.hpp"
#include "leadlag/parallel.hpp"
#include "leadlag/random.hpp"

namespace leadlag {

struct FrequencySeries {
  int word = 0;
  Side side = Side::lead;
  std::vector<double> values;    // t = 1..T at 0..T-1
  std::vector<bool> empty_slice;
};

/// Relative frequency of a word per slice; empty slices give 0 and are flagged.
inline FrequencySeries word_frequency_series(const CorpusPair& corpus, int word, Side side) {
  if (word < 0 || word >= corpus.vocab_size())
    throw ValidationError("word index " + std::to_string(word) + " outside vocabulary of size " +
                          std::to_string(corpus.vocab_size()));
  FrequencySeries out{word, side, {}, {}};
  for (int t = 1; t <= corpus.horizon(); ++t) {
    long long hits = 0, total = 0;
    for (const auto& d : corpus.slice(side, t)) {
      total += d.total;
      auto it = std::lower_bound(d.counts.begin(), d.counts.end(), word,
                                 [](const WordCount& wc, int w) { return wc.word < w; });
      if (it != d.counts.end() && it->word == word) hits += it->count;
    }
    out.values.push_back(total > 0 ? static_cast<double>(hits) / static_cast<double>(total) : 0.0);
    out.empty_slice.push_back(total == 0);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Lagged cross-correlation

struct CcfResult {
  int max_lag = 0;
  std::vector<int> lags;                        // -max_lag .. max_lag
  std::vector<std::optional<double>> coefficient;  // nullopt: zero-variance segment
  double band = 0.0;                            // +-1.96 / sqrt(n)

  std::optional<double> at(int lag) const { return coefficient.at(static_cast<std::size_t>(lag + max_lag)); }
};

/// Positive lag s pairs x_{t-s} with y_t, i.e. x leads y by s slices.
inline CcfResult lagged_ccf(std::span<const double> x, std::span<const double> y, int max_lag) {
  if (x.size() != y.size()) throw ValidationError("cross-correlation needs series of equal length");
  const auto n = static_cast<long>(x.size());
  if (max_lag < 0 || n <= max_lag + 2)
    throw ValidationError("series length " + std::to_string(n) + " must exceed max_lag + 2 = " +
                          std::to_string(max_lag + 2));
  CcfResult out;
  out.max_lag = max_lag;
  out.band = 1.96 / std::sqrt(static_cast<double>(n));
  std::vector<double> a, b;
  for (int s = -max_lag; s <= max_lag; ++s) {
    a.clear();
    b.clear();
    for (long t = std::max<long>(0, s); t < std::min<long>(n, n + s); ++t) {
      a.push_back(x[static_cast<std::size_t>(t - s)]);
      b.push_back(y[static_cast<std::size_t>(t)]);
    }
    out.lags.push_back(s);
    out.coefficient.push_back(numeric::pearson(a, b));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Convergent cross mapping

struct CcmOptions {
  int E = 3;
  int tau = 1;
  std::vector<int> library_sizes;  // empty: 8 geometric steps from E+2 to n-E
  int resamples = 20;
  int surrogates = 200;
  std::uint64_t seed = 1;
  unsigned threads = 1;
};

struct SkillCurve {
  std::vector<int> library_sizes;
  std::vector<double> rho_mean;  // NaN where no resample was predictable
  std::vector<double> rho_sd;
  double terminal_rho = std::nan("");
  double p_value = std::nan("");
  bool unpredictable = false;    // prediction undefined at the full library
  bool no_skill = false;         // unpredictable or terminal rho < 0
};

/// Geometric schedule from E+2 to n-E (capped at the number of embedded points).
inline std::vector<int> default_library_sizes(int n, int points, int E, int steps = 8) {
  const double lo = E + 2;
  const double hi = std::min(points, n - E);
  std::vector<int> out;
  if (hi < lo) return {static_cast<int>(lo)};
  for (int i = 0; i < steps; ++i) {
    const double f = steps == 1 ? 1.0 : static_cast<double>(i) / (steps - 1);
    const int L = static_cast<int>(std::lround(lo * std::pow(hi / lo, f)));
    if (out.empty() || L > out.back()) out.push_back(L);
  }
  return out;
}

namespace detail {

/// Simplex projection weights of the E+1 nearest library neighbours of a point.
struct Neighbourhood {
  std::vector<int> index;
  std::vector<double> weight;
};

class ShadowManifold {
 public:
  ShadowManifold(std::span<const double> y, int E, int tau) : E_(E), tau_(tau) {
    const int n = static_cast<int>(y.size());
    offset_ = (E - 1) * tau;
    points_ = n - offset_;
    coords_.resize(static_cast<std::size_t>(points_) * E);
    for (int p = 0; p < points_; ++p)
      for (int e = 0; e < E; ++e) coords_[static_cast<std::size_t>(p) * E + e] = y[static_cast<std::size_t>(p + offset_ - e * tau)];
    dist_.resize(static_cast<std::size_t>(points_) * points_);
    for (int i = 0; i < points_; ++i)
      for (int j = 0; j < points_; ++j) {
        double d2 = 0.0;
        for (int e = 0; e < E; ++e) {
          const double diff = coords_[static_cast<std::size_t>(i) * E + e] - coords_[static_cast<std::size_t>(j) * E + e];
          d2 += diff * diff;
        }
        dist_[static_cast<std::size_t>(i) * points_ + j] = std::sqrt(d2);
        if (d2 > 0.0) degenerate_ = false;
      }
  }

  int points() const { return points_; }
  /// True when every embedded point coincides, so neighbours carry no information.
  bool degenerate() const { return degenerate_; }
  /// Original-series time index of embedded point p.
  int time(int p) const { return p + offset_; }

  /// Neighbourhood of `target` within `library` (excluding the target itself).
  Neighbourhood neighbours(int target, std::span<const int> library) const {
    const std::size_t k = static_cast<std::size_t>(E_ + 1);
    std::vector<std::pair<double, int>> cand;
    cand.reserve(library.size());
    for (int j : library)
      if (j != target) cand.emplace_back(dist_[static_cast<std::size_t>(target) * points_ + j], j);
    const std::size_t take = std::min(k, cand.size());
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(take), cand.end());
    cand.resize(take);
    Neighbourhood nb;
    if (cand.empty()) return nb;
    const double d1 = cand.front().first;
    double sum = 0.0;
    for (const auto& [d, j] : cand) {
      double w;
      if (d1 == 0.0) w = d == 0.0 ? 1.0 : 0.0;
      else w = std::exp(-d / d1);
      w = std::max(w, 1e-6);
      nb.index.push_back(j);
      nb.weight.push_back(w);
      sum += w;
    }
    for (double& w : nb.weight) w /= sum;
    return nb;
  }

 private:
  int E_, tau_, offset_ = 0, points_ = 0;
  bool degenerate_ = true;
  std::vector<double> coords_;
  std::vector<double> dist_;
};

inline double predict(const Neighbourhood& nb, std::span<const double> target_at_point) {
  double v = 0.0;
  for (std::size_t i = 0; i < nb.index.size(); ++i) v += nb.weight[i] * target_at_point[static_cast<std::size_t>(nb.index[i])];
  return v;
}

/// Cross-map skill of predicting `target` (indexed by embedded point) over all points.
inline std::optional<double> cross_map_skill(const std::vector<Neighbourhood>& hoods, std::span<const double> target) {
  std::vector<double> pred(hoods.size());
  for (std::size_t p = 0; p < hoods.size(); ++p) {
    if (hoods[p].index.empty()) return std::nullopt;
    pred[p] = predict(hoods[p], target);
  }
  return numeric::pearson(target, pred);
}

}  // namespace detail

/// Cross-maps x from the shadow manifold of y. High skill that grows with
/// the library indicates that x drives y.
inline SkillCurve ccm(std::span<const double> x, std::span<const double> y, const CcmOptions& opt = {}) {
  if (x.size() != y.size()) throw ValidationError("CCM needs series of equal length");
  if (opt.E < 1 || opt.tau < 1) throw ValidationError("CCM needs E >= 1 and tau >= 1");
  const int n = static_cast<int>(x.size());
  if (n < (opt.E - 1) * opt.tau + opt.E + 2)
    throw ValidationError("series of length " + std::to_string(n) + " is too short for E = " + std::to_string(opt.E) +
                          ", tau = " + std::to_string(opt.tau));
  if (opt.resamples < 1 || opt.surrogates < 0) throw ValidationError("CCM resamples must be positive");

  const detail::ShadowManifold manifold(y, opt.E, opt.tau);
  const int P = manifold.points();
  std::vector<double> target(static_cast<std::size_t>(P));
  for (int p = 0; p < P; ++p) target[static_cast<std::size_t>(p)] = x[static_cast<std::size_t>(manifold.time(p))];

  SkillCurve out;
  out.library_sizes = opt.library_sizes.empty() ? default_library_sizes(n, P, opt.E) : opt.library_sizes;
  for (std::size_t i = 0; i < out.library_sizes.size(); ++i) {
    const int L = out.library_sizes[i];
    if (L < opt.E + 2 || L > P) throw ValidationError("library size " + std::to_string(L) + " outside [E+2, points]");
    if (i > 0 && L <= out.library_sizes[i - 1]) throw ValidationError("library sizes must be strictly increasing");
  }
  if (manifold.degenerate()) {
    out.rho_mean.assign(out.library_sizes.size(), std::nan(""));
    out.rho_sd.assign(out.library_sizes.size(), 0.0);
    out.unpredictable = true;
    out.no_skill = true;
    return out;
  }

  std::vector<int> all(static_cast<std::size_t>(P));
  for (int p = 0; p < P; ++p) all[static_cast<std::size_t>(p)] = p;

  const std::size_t steps = out.library_sizes.size();
  const auto R = static_cast<std::size_t>(opt.resamples);
  std::vector<std::optional<double>> rho(steps * R);
  parallel_for(steps * R, opt.threads, [&](std::size_t task) {
    const std::size_t step = task / R, r = task % R;
    const int L = out.library_sizes[step];
    std::vector<int> library = all;
    if (L < P) {
      Rng rng = make_rng(opt.seed, {0xcc3, step, r});
      std::shuffle(library.begin(), library.end(), rng);
      library.resize(static_cast<std::size_t>(L));
    }
    std::vector<detail::Neighbourhood> hoods(static_cast<std::size_t>(P));
    for (int p = 0; p < P; ++p) hoods[static_cast<std::size_t>(p)] = manifold.neighbours(p, library);
    rho[task] = detail::cross_map_skill(hoods, target);
  });
  for (std::size_t step = 0; step < steps; ++step) {
    double sum = 0.0, sq = 0.0;
    int defined = 0;
    for (std::size_t r = 0; r < R; ++r)
      if (const auto& v = rho[step * R + r]) {
        sum += *v;
        sq += *v * *v;
        ++defined;
      }
    const double mean = defined > 0 ? sum / defined : std::nan("");
    out.rho_mean.push_back(mean);
    out.rho_sd.push_back(defined > 1 ? std::sqrt(std::max(0.0, (sq - defined * mean * mean) / (defined - 1))) : 0.0);
  }

  // terminal statistic on the full library; neighbourhoods depend only on y,
  // so surrogates of x reuse them
  std::vector<detail::Neighbourhood> full(static_cast<std::size_t>(P));
  for (int p = 0; p < P; ++p) full[static_cast<std::size_t>(p)] = manifold.neighbours(p, all);
  const auto terminal = detail::cross_map_skill(full, target);
  if (!terminal) {
    out.unpredictable = true;
    out.no_skill = true;
    return out;
  }
  out.terminal_rho = *terminal;
  out.no_skill = out.terminal_rho < 0.0;

  if (opt.surrogates > 0) {
    const int margin = std::min(std::max(10, n / 10), std::max(1, (n - 1) / 2));
    std::vector<std::optional<double>> surr(static_cast<std::size_t>(opt.surrogates));
    parallel_for(surr.size(), opt.threads, [&](std::size_t s) {
      Rng rng = make_rng(opt.seed, {0x5a77, s});
      std::uniform_int_distribution<int> shift_dist(margin, n - margin);
      const int shift = shift_dist(rng);
      std::vector<double> shifted(static_cast<std::size_t>(P));
      for (int p = 0; p < P; ++p)
        shifted[static_cast<std::size_t>(p)] = x[static_cast<std::size_t>((manifold.time(p) + shift) % n)];
      surr[s] = detail::cross_map_skill(full, shifted);
    });
    int hits = 0;
    for (const auto& v : surr)
      if (v && *v >= out.terminal_rho) ++hits;
    out.p_value = static_cast<double>(hits) / opt.surrogates;
  }
  return out;
}

}  // namespace leadlag
