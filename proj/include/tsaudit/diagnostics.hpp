#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string_view>
#include <tuple>
#include <vector>

#include "tsaudit/core.hpp"
#include "tsaudit/discord.hpp"
#include "tsaudit/parallel.hpp"
#include "tsaudit/rng.hpp"

namespace tsaudit {

/// Audit findings, per series unless noted.
enum class Flag {
  Trivial,             // some one-liner detects the labels perfectly
  HighDensity,         // one region covers a large share of the series
  MultipleAnomalies,   // more than one labelled region
  Sandwich,            // two regions separated by very few normal samples
  LabelInconsistency,  // consistency scan produced findings
  RunToFailure,        // corpus level: anomalies cluster at series ends
};

inline constexpr std::array<Flag, 6> kAllFlags = {Flag::Trivial,  Flag::HighDensity,
                                                   Flag::MultipleAnomalies, Flag::Sandwich,
                                                   Flag::LabelInconsistency, Flag::RunToFailure};

inline std::string_view flag_name(Flag f) {
  switch (f) {
    case Flag::Trivial: return "TRIVIAL";
    case Flag::HighDensity: return "HIGH_DENSITY";
    case Flag::MultipleAnomalies: return "MULTIPLE_ANOMALIES";
    case Flag::Sandwich: return "SANDWICH";
    case Flag::LabelInconsistency: return "LABEL_INCONSISTENCY";
    case Flag::RunToFailure: return "RUN_TO_FAILURE";
  }
  return "?";
}

inline std::optional<Flag> parse_flag(std::string_view s) {
  for (Flag f : kAllFlags)
    if (flag_name(f) == s) return f;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Density
// ---------------------------------------------------------------------------

struct DensityMetrics {
  double anomaly_fraction = 0.0;
  Index labeled_samples = 0;
  Index region_count = 0;
  double max_region_fraction = 0.0;
  std::optional<Index> min_inter_region_gap;  // normal samples between neighbours
};

struct DensityThresholds {
  double high_density_fraction = 1.0 / 3.0;
  Index sandwich_gap = 2;
};

inline DensityMetrics density_metrics(const LabelSet& labels) {
  const Index n = labels.series_length();
  require(n > 0, "density_metrics: series length is zero");
  DensityMetrics d;
  d.region_count = labels.region_count();
  d.labeled_samples = labels.labeled_count();
  d.anomaly_fraction = static_cast<double>(d.labeled_samples) / static_cast<double>(n);
  Index longest = 0;
  const auto& rs = labels.regions();
  for (Index i = 0; i < rs.size(); ++i) {
    longest = std::max(longest, rs[i].length());
    if (i > 0) {
      const Index gap = rs[i].start - rs[i - 1].end - 1;
      d.min_inter_region_gap = std::min(d.min_inter_region_gap.value_or(gap), gap);
    }
  }
  d.max_region_fraction = static_cast<double>(longest) / static_cast<double>(n);
  return d;
}

inline std::vector<Flag> density_flags(const DensityMetrics& d, const DensityThresholds& t = {}) {
  std::vector<Flag> flags;
  if (d.max_region_fraction >= t.high_density_fraction) flags.push_back(Flag::HighDensity);
  if (d.region_count > 1) flags.push_back(Flag::MultipleAnomalies);
  if (d.min_inter_region_gap && *d.min_inter_region_gap <= t.sandwich_gap) flags.push_back(Flag::Sandwich);
  return flags;
}

// ---------------------------------------------------------------------------
// Position bias
// ---------------------------------------------------------------------------

struct PositionBias {
  std::vector<double> relative_positions;
  double mean_position = 0.0;
  double last_point_hit_rate = 0.0;
};

inline constexpr double kRunToFailureMeanPosition = 0.7;

/// Where the rightmost labelled region ends, relative to the series length,
/// and how often the final sample lands inside it (dilated by `slop`).
inline PositionBias position_bias(std::span<const LabelSet> corpus, Index slop) {
  require(!corpus.empty(), "position_bias: empty corpus");
  PositionBias pb;
  Index hits = 0;
  double sum = 0.0;
  for (const auto& labels : corpus) {
    require(!labels.empty(), "position_bias: every series must be labelled");
    const Index n = labels.series_length();
    require(n >= 2, "position_bias: series too short");
    const Region& last = labels.regions().back();
    const double pos = static_cast<double>(last.end) / static_cast<double>(n - 1);
    pb.relative_positions.push_back(pos);
    sum += pos;
    if (dilate_region(last, slop, n).contains(n - 1)) ++hits;
  }
  const double count = static_cast<double>(corpus.size());
  pb.mean_position = sum / count;
  pb.last_point_hit_rate = static_cast<double>(hits) / count;
  return pb;
}

inline bool run_to_failure_suspected(const PositionBias& pb,
                                     double threshold = kRunToFailureMeanPosition) noexcept {
  return pb.mean_position > threshold;
}

// ---------------------------------------------------------------------------
// Feature battery
// ---------------------------------------------------------------------------

struct SubseqFeatures {
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
  double variance = 0.0;       // sample variance
  double lag1_autocorr = 0.0;  // 0 for constant snippets
  double complexity = 0.0;     // sqrt(sum of squared first differences)
};

inline SubseqFeatures subsequence_features(std::span<const double> values, const Region& r) {
  require(r.start <= r.end && r.end < values.size(), "subsequence_features: region outside series");
  require(r.length() >= 2, "subsequence_features: region needs at least 2 samples");
  const auto x = values.subspan(r.start, r.length());
  SubseqFeatures f;
  const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
  f.min = *lo;
  f.max = *hi;
  double cid = 0.0;
  for (Index t = 0; t + 1 < x.size(); ++t) cid += (x[t + 1] - x[t]) * (x[t + 1] - x[t]);
  f.complexity = std::sqrt(cid);
  if (f.min == f.max) {
    f.mean = f.min;
    return f;
  }
  const Moments mo = moments(x);
  f.mean = std::clamp(mo.mean, f.min, f.max);
  f.variance = mo.std * mo.std;
  double lag = 0.0;
  for (Index t = 0; t + 1 < x.size(); ++t) lag += (x[t] - mo.mean) * (x[t + 1] - mo.mean);
  f.lag1_autocorr = std::clamp(lag / mo.ss, -1.0, 1.0);
  return f;
}

inline SubseqFeatures subsequence_features(const TimeSeries& ts, const Region& r) {
  return subsequence_features(ts.values(), r);
}

// ---------------------------------------------------------------------------
// Label consistency
// ---------------------------------------------------------------------------

enum class FindingKind { FnCandidate, FpCandidate };

inline std::string_view finding_name(FindingKind k) {
  return k == FindingKind::FnCandidate ? "FN_CANDIDATE" : "FP_CANDIDATE";
}

struct ConsistencyFinding {
  FindingKind kind = FindingKind::FnCandidate;
  Region location;   // FN: unlabelled look-alike window; FP: the labelled region
  Region reference;  // FN: query window around the label; FP: nearest unlabelled window
  double distance = 0.0;
};

struct ConsistencyParams {
  Index sublen = 0;
  double alpha = 0.5;
  Index sample_size = 256;
  std::uint64_t seed = 0;
};

struct ConsistencyScan {
  double median_nn_distance = 0.0;
  double threshold = 0.0;
  Index candidate_count = 0;
  std::vector<ConsistencyFinding> findings;
};

/// Looks for unlabelled windows that match a labelled anomaly (possible false
/// negatives) and labelled anomalies that match ordinary data (possible false
/// positives). "Match" means a z-normalized distance within alpha times the
/// median nearest-neighbour distance of a seeded sample of unlabelled windows.
/// Candidate windows must stay clear of every labelled region dilated by
/// floor(sublen/2).
inline ConsistencyScan label_consistency_scan(const TimeSeries& ts, const LabelSet& labels,
                                              const ConsistencyParams& p, unsigned jobs = 1) {
  const Index n = ts.size();
  const Index m = p.sublen;
  require(m >= 4, "label_consistency_scan: sublen must be >= 4");
  require(m <= n / 2, "label_consistency_scan: sublen must be <= n/2");
  require(!labels.empty(), "label_consistency_scan: label set is empty");
  require(labels.series_length() == n, "label_consistency_scan: labels do not match series length");
  require(p.alpha >= 0.0 && std::isfinite(p.alpha), "label_consistency_scan: alpha must be >= 0");

  const auto x = ts.values();
  const WindowStats ws(x, m, kZnormEps);
  const Index windows = n - m + 1;

  std::vector<Region> blocked;
  for (const auto& r : labels.regions()) blocked.push_back(dilate_region(r, m / 2, n));
  std::vector<Index> cand;
  for (Index j = 0; j < windows; ++j) {
    const Region span{j, j + m - 1};
    if (std::none_of(blocked.begin(), blocked.end(), [&](const Region& b) { return b.intersects(span); }))
      cand.push_back(j);
  }

  ConsistencyScan scan;
  scan.candidate_count = cand.size();
  if (cand.empty()) return scan;

  // Seeded sample without replacement (partial Fisher-Yates).
  std::vector<Index> pool = cand;
  const Index take = std::min<Index>(p.sample_size, pool.size());
  CounterRng rng(p.seed, 0x5CA9);
  for (Index i = 0; i < take; ++i) std::swap(pool[i], pool[rng.uniform_int(i, pool.size() - 1)]);
  pool.resize(take);

  constexpr double kInf = std::numeric_limits<double>::infinity();
  const Index excl = std::max<Index>(1, m / 2);
  std::vector<double> nn(take, kInf);
  parallel_for(take, jobs, [&](Index s) {
    const Index a = pool[s];
    for (Index b : cand)
      if ((a > b ? a - b : b - a) >= excl) nn[s] = std::min(nn[s], znorm_distance(x, ws, a, b));
  });
  nn.erase(std::remove(nn.begin(), nn.end(), kInf), nn.end());
  if (!nn.empty()) {
    std::sort(nn.begin(), nn.end());
    const Index h = nn.size() / 2;
    scan.median_nn_distance = nn.size() % 2 ? nn[h] : nn[h - 1] + (nn[h] - nn[h - 1]) / 2.0;
  }
  scan.threshold = p.alpha * scan.median_nn_distance;

  for (const auto& r : labels.regions()) {
    const Index centre = r.start + (r.end - r.start) / 2;
    const Index q = std::min(centre >= m / 2 ? centre - m / 2 : 0, n - m);
    const Region query{q, q + m - 1};

    std::vector<std::pair<double, Index>> profile;
    profile.reserve(cand.size());
    for (Index j : cand) profile.emplace_back(znorm_distance(x, ws, q, j), j);

    std::vector<std::pair<double, Index>> close;
    for (const auto& e : profile)
      if (e.first <= scan.threshold) close.push_back(e);
    std::sort(close.begin(), close.end());
    std::vector<Index> picked;
    for (const auto& [d, j] : close) {
      const bool disjoint = std::all_of(picked.begin(), picked.end(),
                                        [&](Index o) { return (j > o ? j - o : o - j) >= m; });
      if (!disjoint) continue;
      picked.push_back(j);
      scan.findings.push_back({FindingKind::FnCandidate, Region{j, j + m - 1}, query, d});
    }

    const auto nearest = *std::min_element(profile.begin(), profile.end());
    if (nearest.first < scan.threshold)
      scan.findings.push_back({FindingKind::FpCandidate, r,
                               Region{nearest.second, nearest.second + m - 1}, nearest.first});
  }
  return scan;
}

}  // namespace tsaudit
