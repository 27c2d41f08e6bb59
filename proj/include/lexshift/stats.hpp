#pragma once

// Rank tests, correlation, one-sample t / Cohen's d, and percentile
// bootstrap intervals.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "lexshift/common/error.hpp"
#include "lexshift/common/parallel.hpp"
#include "lexshift/common/random.hpp"

namespace lexshift::stats {

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;
  std::size_t n1 = 0;
  std::size_t n2 = 0;
  bool exact = false;
};

struct SignedRankResult : TestResult {
  double w_plus = 0.0;
  double w_minus = 0.0;
};

enum class PMethod { automatic, exact, normal };

inline double mean(std::span<const double> x) {
  if (x.empty()) throw Error(Errc::EmptySample, "mean of empty sample");
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

/// Sample standard deviation (n - 1 denominator).
inline double sample_sd(std::span<const double> x) {
  if (x.size() < 2) throw Error(Errc::EmptySample, "standard deviation needs >= 2 values");
  double m = mean(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(x.size() - 1));
}

/// Linear-interpolation quantile (R type 7) of unsorted data.
inline double quantile(std::vector<double> x, double q) {
  if (x.empty()) throw Error(Errc::EmptySample, "quantile of empty sample");
  std::sort(x.begin(), x.end());
  double h = (static_cast<double>(x.size()) - 1.0) * std::clamp(q, 0.0, 1.0);
  auto lo = static_cast<std::size_t>(std::floor(h));
  std::size_t hi = std::min(lo + 1, x.size() - 1);
  return x[lo] + (h - static_cast<double>(lo)) * (x[hi] - x[lo]);
}

inline double median(std::vector<double> x) { return quantile(std::move(x), 0.5); }

struct Ranking {
  std::vector<double> ranks;  // 1-based midranks
  double tie_term = 0.0;      // sum over tie groups of t^3 - t
};

inline Ranking midranks(std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  Ranking r;
  r.ranks.assign(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && x[order[j + 1]] == x[order[i]]) ++j;
    double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) r.ranks[order[k]] = avg;
    double t = static_cast<double>(j - i + 1);
    r.tie_term += t * t * t - t;
    i = j + 1;
  }
  return r;
}

inline double normal_two_sided(double z) {
  return std::clamp(std::erfc(std::abs(z) / std::sqrt(2.0)), 0.0, 1.0);
}

namespace detail {

// Number of subsets of each size-k doubled-rank sum, via subset-sum DP.
// Returns counts indexed by doubled sum.
inline std::vector<double> subset_sum_distribution(std::span<const int> doubled, std::size_t k) {
  int total = 0;
  std::vector<int> sorted(doubled.begin(), doubled.end());
  std::sort(sorted.rbegin(), sorted.rend());
  for (std::size_t i = 0; i < k; ++i) total += sorted[i];
  std::vector<std::vector<double>> dp(k + 1, std::vector<double>(static_cast<std::size_t>(total) + 1, 0.0));
  dp[0][0] = 1.0;
  for (int w : doubled) {
    for (std::size_t j = std::min(k, dp.size() - 1); j >= 1; --j) {
      auto& cur = dp[j];
      const auto& prev = dp[j - 1];
      for (int s = total; s >= w; --s) cur[static_cast<std::size_t>(s)] += prev[static_cast<std::size_t>(s - w)];
    }
  }
  return dp[k];
}

inline double two_sided_from_counts(const std::vector<double>& counts, std::size_t observed) {
  double total = 0.0, le = 0.0, ge = 0.0;
  for (std::size_t s = 0; s < counts.size(); ++s) {
    total += counts[s];
    if (s <= observed) le += counts[s];
    if (s >= observed) ge += counts[s];
  }
  return std::clamp(2.0 * std::min(le, ge) / total, 0.0, 1.0);
}

}  // namespace detail

/// Mann-Whitney U for sample `a` against `b` (U_a = pairs with a > b plus
/// half the ties). Exact p from the permutation distribution (ties handled
/// through midranks) when either sample has fewer than 20 values; normal
/// approximation with tie-corrected variance and continuity correction
/// otherwise, or when the exact table would be too large to build.
inline TestResult mann_whitney_u(std::span<const double> a, std::span<const double> b,
                                 PMethod method = PMethod::automatic) {
  if (a.empty() || b.empty()) throw Error(Errc::EmptySample, "Mann-Whitney U needs two non-empty samples");
  const std::size_t na = a.size(), nb = b.size(), n = na + nb;
  std::vector<double> pooled(a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());
  for (double v : pooled)
    if (!std::isfinite(v)) throw Error(Errc::NonFinite, "Mann-Whitney U input");
  Ranking rk = midranks(pooled);
  double ra = 0.0;
  for (std::size_t i = 0; i < na; ++i) ra += rk.ranks[i];
  const double u = ra - static_cast<double>(na) * (static_cast<double>(na) + 1.0) / 2.0;

  TestResult res;
  res.statistic = u;
  res.n1 = na;
  res.n2 = nb;

  const std::size_t k = std::min(na, nb);
  const double work = static_cast<double>(n) * static_cast<double>(k) * 2.0 * static_cast<double>(k) *
                      static_cast<double>(n);
  bool exact = method == PMethod::exact ||
               (method == PMethod::automatic && (na < 20 || nb < 20) && work <= 4e8);
  if (exact) {
    // Distribution of the doubled rank sum of the smaller sample.
    std::vector<int> doubled(n);
    for (std::size_t i = 0; i < n; ++i) doubled[i] = static_cast<int>(std::lround(2.0 * rk.ranks[i]));
    bool small_is_a = na <= nb;
    double observed = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if ((i < na) == small_is_a) observed += rk.ranks[i];
    auto counts = detail::subset_sum_distribution(doubled, k);
    res.p_value = detail::two_sided_from_counts(counts, static_cast<std::size_t>(std::lround(2.0 * observed)));
    res.exact = true;
    return res;
  }
  const double dn = static_cast<double>(n);
  const double mu = static_cast<double>(na) * static_cast<double>(nb) / 2.0;
  const double var = static_cast<double>(na) * static_cast<double>(nb) / 12.0 *
                     ((dn + 1.0) - rk.tie_term / (dn * (dn - 1.0)));
  if (var <= 0.0) {
    res.p_value = 1.0;
    return res;
  }
  double z = std::max(0.0, std::abs(u - mu) - 0.5) / std::sqrt(var);
  res.p_value = normal_two_sided(z);
  return res;
}

/// Wilcoxon signed-rank test against zero. Zeros are dropped; tied
/// magnitudes get midranks. statistic = min(W+, W-). Exact p for n <= 15
/// nonzero values, normal approximation with tie correction and continuity
/// correction above.
inline SignedRankResult wilcoxon_signed_rank(std::span<const double> x, PMethod method = PMethod::automatic) {
  if (x.empty()) throw Error(Errc::EmptySample, "Wilcoxon signed-rank needs a non-empty sample");
  std::vector<double> mags;
  std::vector<bool> positive;
  for (double v : x) {
    if (!std::isfinite(v)) throw Error(Errc::NonFinite, "Wilcoxon input");
    if (v == 0.0) continue;
    mags.push_back(std::abs(v));
    positive.push_back(v > 0.0);
  }
  if (mags.empty()) throw Error(Errc::AllZeros, "no nonzero differences");
  const std::size_t n = mags.size();
  Ranking rk = midranks(mags);
  SignedRankResult res;
  for (std::size_t i = 0; i < n; ++i) (positive[i] ? res.w_plus : res.w_minus) += rk.ranks[i];
  res.statistic = std::min(res.w_plus, res.w_minus);
  res.n1 = n;

  bool exact = method == PMethod::exact || (method == PMethod::automatic && n <= 15);
  if (exact) {
    std::vector<int> doubled(n);
    int total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      doubled[i] = static_cast<int>(std::lround(2.0 * rk.ranks[i]));
      total += doubled[i];
    }
    std::vector<double> counts(static_cast<std::size_t>(total) + 1, 0.0);
    counts[0] = 1.0;
    for (int w : doubled)
      for (int s = total; s >= w; --s) counts[static_cast<std::size_t>(s)] += counts[static_cast<std::size_t>(s - w)];
    res.p_value = detail::two_sided_from_counts(counts, static_cast<std::size_t>(std::lround(2.0 * res.w_plus)));
    res.exact = true;
    return res;
  }
  const double dn = static_cast<double>(n);
  const double mu = dn * (dn + 1.0) / 4.0;
  const double var = dn * (dn + 1.0) * (2.0 * dn + 1.0) / 24.0 - rk.tie_term / 48.0;
  if (var <= 0.0) {
    res.p_value = 1.0;
    return res;
  }
  double z = std::max(0.0, std::abs(res.w_plus - mu) - 0.5) / std::sqrt(var);
  res.p_value = normal_two_sided(z);
  return res;
}

inline double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(Errc::LengthMismatch, "pearson: x and y differ in length");
  const double mx = mean(x), my = mean(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw Error(Errc::ZeroVariance, "pearson: constant input");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

inline double student_t_two_sided(double t, double df) {
  if (!std::isfinite(t)) return 0.0;
  boost::math::students_t dist(df);
  return std::clamp(2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t))), 0.0, 1.0);
}

/// Spearman rank correlation; p from the t approximation with n - 2 df.
inline TestResult spearman_rho(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(Errc::LengthMismatch, "spearman: x and y differ in length");
  if (x.size() < 3) throw Error(Errc::EmptySample, "spearman needs >= 3 pairs");
  auto rx = midranks(x).ranks;
  auto ry = midranks(y).ranks;
  double rho = pearson(rx, ry);
  TestResult res;
  res.statistic = rho;
  res.n1 = x.size();
  const double df = static_cast<double>(x.size()) - 2.0;
  if (std::abs(rho) >= 1.0) {
    res.p_value = 0.0;
  } else {
    double t = rho * std::sqrt(df / (1.0 - rho * rho));
    res.p_value = student_t_two_sided(t, df);
  }
  return res;
}

/// t = (mean - mu0) * sqrt(n) / sd with the n - 1 sample sd.
inline TestResult one_sample_t(std::span<const double> x, double mu0 = 0.0) {
  if (x.size() < 2) throw Error(Errc::EmptySample, "one-sample t needs >= 2 values");
  double m = mean(x);
  double sd = sample_sd(x);
  if (sd == 0.0) throw Error(Errc::ZeroVariance, "one-sample t: constant sample");
  TestResult res;
  res.n1 = x.size();
  res.statistic = (m - mu0) * std::sqrt(static_cast<double>(x.size())) / sd;
  res.p_value = student_t_two_sided(res.statistic, static_cast<double>(x.size() - 1));
  return res;
}

inline double cohens_d_one_sample(std::span<const double> x) {
  if (x.size() < 2) throw Error(Errc::EmptySample, "Cohen's d needs >= 2 values");
  double sd = sample_sd(x);
  if (sd == 0.0) throw Error(Errc::ZeroVariance, "Cohen's d: constant sample");
  return mean(x) / sd;
}

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// Percentile bootstrap. `statistic` is called with a resampled copy of
/// `data` (std::vector<Row>) and must return a double. Each replicate uses an
/// RNG stream derived from (seed, replicate), so the interval does not
/// depend on the thread count.
template <class Row, class Statistic>
Interval bootstrap_ci(std::span<const Row> data, Statistic&& statistic, std::size_t n_boot = 1000,
                      double level = 0.95, std::uint64_t seed = 0, unsigned threads = default_threads()) {
  if (data.empty()) throw Error(Errc::EmptySample, "bootstrap of empty data");
  if (n_boot < 100) throw Error(Errc::InvalidArgument, "bootstrap needs n_boot >= 100");
  if (!(level > 0.0 && level < 1.0)) throw Error(Errc::InvalidArgument, "bootstrap level must be in (0, 1)");
  std::vector<double> reps(n_boot);
  parallel_for(
      n_boot,
      [&](std::size_t b) {
        Rng rng(derive_seed(seed, b));
        std::vector<Row> sample;
        sample.reserve(data.size());
        for (std::size_t i = 0; i < data.size(); ++i) sample.push_back(data[rng.below(data.size())]);
        reps[b] = statistic(sample);
      },
      threads);
  double alpha = (1.0 - level) / 2.0;
  return Interval{quantile(reps, alpha), quantile(reps, 1.0 - alpha)};
}

template <class Row, class Statistic>
Interval bootstrap_ci(const std::vector<Row>& data, Statistic&& statistic, std::size_t n_boot = 1000,
                      double level = 0.95, std::uint64_t seed = 0, unsigned threads = default_threads()) {
  return bootstrap_ci(std::span<const Row>(data), std::forward<Statistic>(statistic), n_boot, level, seed,
                      threads);
}

}  // namespace lexshift::stats
