#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "tsaudit/core.hpp"
#include "tsaudit/parallel.hpp"

namespace tsaudit {

inline constexpr double kZnormEps = 1e-8;

/// Mean and sample standard deviation of x (two-pass).
struct Moments {
  double mean = 0.0;
  double std = 0.0;
  double ss = 0.0;  // sum of squared deviations
};

inline Moments moments(std::span<const double> x) {
  const double n = static_cast<double>(x.size());
  double sum = 0.0;
  for (double v : x) sum += v;
  const double mean = sum / n;
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  return {mean, x.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0, ss};
}

/// (x - mean) / sample_std; the zero vector when std < eps.
inline std::vector<double> znorm(std::span<const double> x, double eps = kZnormEps) {
  require(x.size() >= 2, "znorm: need at least 2 samples");
  const Moments mo = moments(x);
  std::vector<double> z(x.size(), 0.0);
  if (mo.std < eps) return z;
  for (Index i = 0; i < x.size(); ++i) z[i] = (x[i] - mo.mean) / mo.std;
  return z;
}

/// Per-window moments of every length-m subsequence.
struct WindowStats {
  Index m = 0;
  std::vector<double> mean;
  std::vector<double> std;
  std::vector<double> ss;  // sum of squared deviations
  std::vector<bool> flat;  // std < eps: z-normalizes to the zero vector

  WindowStats(std::span<const double> x, Index m_, double eps) : m(m_) {
    const Index count = x.size() - m + 1;
    mean.resize(count);
    std.resize(count);
    ss.resize(count);
    flat.resize(count);
    for (Index i = 0; i < count; ++i) {
      const Moments mo = moments(x.subspan(i, m));
      mean[i] = mo.mean;
      std[i] = mo.std;
      ss[i] = mo.ss;
      flat[i] = mo.std < eps;
    }
  }
};

/// Euclidean distance between the z-normalized windows at i and j, evaluated
/// sample by sample.
inline double znorm_distance(std::span<const double> x, const WindowStats& ws, Index i, Index j) {
  const Index m = ws.m;
  if (ws.flat[i] && ws.flat[j]) return 0.0;
  double sum = 0.0;
  for (Index t = 0; t < m; ++t) {
    const double zi = ws.flat[i] ? 0.0 : (x[i + t] - ws.mean[i]) / ws.std[i];
    const double zj = ws.flat[j] ? 0.0 : (x[j + t] - ws.mean[j]) / ws.std[j];
    sum += (zi - zj) * (zi - zj);
  }
  return std::sqrt(sum);
}

struct DiscordParams {
  Index sublen = 0;
  std::optional<Index> exclusion;  // default floor(m/2)
  double znorm_eps = kZnormEps;

  Index exclusion_zone() const noexcept { return exclusion.value_or(sublen / 2); }
};

inline void validate(const DiscordParams& p, Index n) {
  require(p.sublen >= 4, "discord: subsequence length must be >= 4");
  require(n >= 2 * p.sublen, "discord: series of length " + std::to_string(n) +
                                 " is too short for subsequence length " +
                                 std::to_string(p.sublen) + " (need n >= 2m)");
  const Index windows = n - p.sublen + 1;
  require(p.exclusion_zone() >= 1, "discord: exclusion zone must be >= 1");
  require(p.exclusion_zone() <= (windows - 1) / 2,
          "discord: exclusion zone leaves some subsequences without neighbours");
  require(p.znorm_eps > 0.0, "discord: znorm epsilon must be positive");
}

namespace detail {

// Pairs whose correlation exceeds this are recomputed sample by sample; there
// the distance is small and the recurrence's rounding would dominate it.
inline constexpr double kRecomputeCorrelation = 1.0 - 1e-4;
// Direct covariance refresh interval along a diagonal.
inline constexpr Index kRefreshInterval = 1024;

inline double direct_cov(std::span<const double> x, const WindowStats& ws, Index i, Index j) {
  double s = 0.0;
  for (Index t = 0; t < ws.m; ++t) s += (x[i + t] - ws.mean[i]) * (x[j + t] - ws.mean[j]);
  return s;
}

}  // namespace detail

/// Nearest-neighbour distance of every length-m subsequence under
/// z-normalized Euclidean distance, excluding neighbours closer than the
/// exclusion zone. Exhaustive over all pairs; O(n^2) after O(nm) setup.
///
/// Pairs are visited diagonal by diagonal with the covariance recurrence
/// cov(i+1, j+1) = cov(i, j) + df[i]*dg[j] + df[j]*dg[i]. Each pair's distance
/// depends only on its position on the diagonal, and per-position minima are
/// exact, so the trace is bit-identical for any `jobs`.
inline ScoreTrace discord_score(std::span<const double> x, const DiscordParams& p, unsigned jobs = 1) {
  const Index n = x.size();
  validate(p, n);
  const Index m = p.sublen;
  const Index count = n - m + 1;
  const Index excl = p.exclusion_zone();
  const WindowStats ws(x, m, p.znorm_eps);
  const double dof = static_cast<double>(m - 1);

  std::vector<double> df(count - 1), dg(count - 1);
  for (Index i = 0; i + 1 < count; ++i) {
    df[i] = (x[i + m] - x[i]) / 2.0;
    dg[i] = (x[i + m] - ws.mean[i + 1]) + (x[i] - ws.mean[i]);
  }

  auto pair_distance = [&](Index i, Index j, double cov) {
    if (ws.flat[i] || ws.flat[j]) return (ws.flat[i] && ws.flat[j]) ? 0.0 : std::sqrt(dof);
    const double rho = cov / std::sqrt(ws.ss[i] * ws.ss[j]);
    if (rho > detail::kRecomputeCorrelation) return znorm_distance(x, ws, i, j);
    return std::sqrt(std::max(0.0, 2.0 * dof * (1.0 - rho)));
  };

  const Index diagonals = count - excl;  // offsets excl .. count-1
  const Index chunks = std::max<Index>(1, std::min<Index>(jobs == 0 ? 1 : jobs, diagonals));
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> partial(chunks, std::vector<double>(count, kInf));

  parallel_for(chunks, jobs, [&](Index chunk) {
    auto& best = partial[chunk];
    for (Index off = excl + chunk; off < count; off += chunks) {
      double cov = 0.0;
      for (Index i = 0; i + off < count; ++i) {
        const Index j = i + off;
        if (i % detail::kRefreshInterval == 0)
          cov = detail::direct_cov(x, ws, i, j);
        else
          cov += df[i - 1] * dg[j - 1] + df[j - 1] * dg[i - 1];
        const double d = pair_distance(i, j, cov);
        best[i] = std::min(best[i], d);
        best[j] = std::min(best[j], d);
      }
    }
  });

  std::vector<double> scores = std::move(partial[0]);
  for (Index c = 1; c < chunks; ++c)
    for (Index i = 0; i < count; ++i) scores[i] = std::min(scores[i], partial[c][i]);
  return ScoreTrace(std::move(scores), Alignment::SubseqStart, m, n);
}

inline ScoreTrace discord_score(const TimeSeries& ts, const DiscordParams& p, unsigned jobs = 1) {
  return discord_score(ts.values(), p, jobs);
}

/// Greedy top-k: highest score first (smallest index on ties), skipping any
/// position closer than `exclusion` to an earlier pick. Returns trace indices.
inline std::vector<Index> top_k_discords(const ScoreTrace& trace, Index k, Index exclusion) {
  require(k >= 1, "top_k_discords: k must be >= 1");
  const auto s = trace.scores();
  std::vector<Index> order(s.size());
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return s[a] > s[b]; });
  std::vector<Index> picks;
  for (Index idx : order) {
    if (picks.size() == k) break;
    const bool clear = std::all_of(picks.begin(), picks.end(), [&](Index p) {
      return (idx > p ? idx - p : p - idx) >= exclusion;
    });
    if (clear) picks.push_back(idx);
  }
  return picks;
}

}  // namespace tsaudit
