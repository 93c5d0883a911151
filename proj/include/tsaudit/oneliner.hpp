#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "tsaudit/core.hpp"
#include "tsaudit/parallel.hpp"

namespace tsaudit {

// ---------------------------------------------------------------------------
// Elementwise primitives
// ---------------------------------------------------------------------------

/// d[i] = x[i+1] - x[i].
inline std::vector<double> diff_series(std::span<const double> x) {
  require(x.size() >= 2, "diff_series: need at least 2 samples");
  std::vector<double> d(x.size() - 1);
  for (Index i = 0; i + 1 < x.size(); ++i) d[i] = x[i + 1] - x[i];
  return d;
}

inline std::vector<double> diff_series(const TimeSeries& ts) { return diff_series(ts.values()); }

/// Window of nominal length k centred on i: floor((k-1)/2) samples before,
/// ceil((k-1)/2) after, clipped to the sequence.
inline Region moving_window(Index i, Index k, Index n) noexcept {
  const Index before = (k - 1) / 2;
  const Index after = k / 2;
  return Region{i >= before ? i - before : 0, std::min(n - 1, i + after)};
}

/// Centred moving mean with shrinking boundary windows.
inline std::vector<double> moving_mean(std::span<const double> x, Index k) {
  require(k >= 1, "moving_mean: window length must be >= 1");
  std::vector<double> out(x.size());
  for (Index i = 0; i < x.size(); ++i) {
    const Region w = moving_window(i, k, x.size());
    double sum = 0.0;
    for (Index j = w.start; j <= w.end; ++j) sum += x[j];
    out[i] = sum / static_cast<double>(w.length());
  }
  return out;
}

/// Centred moving sample standard deviation (divisor count-1; 0 for a single sample).
inline std::vector<double> moving_std(std::span<const double> x, Index k) {
  require(k >= 1, "moving_std: window length must be >= 1");
  std::vector<double> out(x.size());
  for (Index i = 0; i < x.size(); ++i) {
    const Region w = moving_window(i, k, x.size());
    const Index count = w.length();
    if (count == 1) {
      out[i] = 0.0;
      continue;
    }
    double sum = 0.0;
    for (Index j = w.start; j <= w.end; ++j) sum += x[j];
    const double mean = sum / static_cast<double>(count);
    double ss = 0.0;
    for (Index j = w.start; j <= w.end; ++j) ss += (x[j] - mean) * (x[j] - mean);
    out[i] = std::sqrt(ss / static_cast<double>(count - 1));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Detector family
// ---------------------------------------------------------------------------

enum class Family {
  GeneralAbs,     // abs(diff) > u*movmean + c*movstd + b
  General,        // diff > u*movmean + c*movstd + b
  AbsDiffThresh,  // abs(diff) > b
  AbsDiffMov,     // abs(diff) > movmean + c*movstd + b
  DiffThresh,     // diff > b
  DiffMov,        // diff > movmean + c*movstd + b
  ConstRun,       // member of a constant run of length >= run_len
};

/// Simplest forms first; the general forms only after their simplified ones.
inline constexpr std::array<Family, 7> kSearchOrder = {
    Family::AbsDiffThresh, Family::DiffThresh, Family::AbsDiffMov, Family::DiffMov,
    Family::GeneralAbs,    Family::General,    Family::ConstRun};

inline constexpr std::array<Family, 4> kSimplifiedFamilies = {
    Family::AbsDiffThresh, Family::AbsDiffMov, Family::DiffThresh, Family::DiffMov};

inline std::string_view family_name(Family f) {
  switch (f) {
    case Family::GeneralAbs: return "general-abs";
    case Family::General: return "general";
    case Family::AbsDiffThresh: return "abs-diff-thresh";
    case Family::AbsDiffMov: return "abs-diff-mov";
    case Family::DiffThresh: return "diff-thresh";
    case Family::DiffMov: return "diff-mov";
    case Family::ConstRun: return "const-run";
  }
  return "?";
}

inline std::optional<Family> parse_family(std::string_view name) {
  for (Family f : kSearchOrder)
    if (family_name(f) == name) return f;
  return std::nullopt;
}

inline bool uses_abs(Family f) noexcept {
  return f == Family::GeneralAbs || f == Family::AbsDiffThresh || f == Family::AbsDiffMov;
}
inline bool is_pure_threshold(Family f) noexcept {
  return f == Family::AbsDiffThresh || f == Family::DiffThresh;
}
inline bool is_general(Family f) noexcept {
  return f == Family::GeneralAbs || f == Family::General;
}

struct OneLinerSpec {
  Family family = Family::AbsDiffThresh;
  int u = 0;
  Index k = 1;
  double c = 0.0;
  double b = 0.0;
  Index run_len = 3;

  static OneLinerSpec threshold(Family f, double b) { return normalized({f, 0, 1, 0.0, b, 3}); }
  static OneLinerSpec moving(Family f, Index k, double c, double b, int u = 1) {
    return normalized({f, u, k, c, b, 3});
  }
  static OneLinerSpec const_run(Index run_len) {
    return normalized({Family::ConstRun, 0, 1, 0.0, 0.0, run_len});
  }

  /// Clears the parameters a family ignores: (u, k, c) = (0, 1, 0) for pure
  /// thresholds, u = 1 for the simplified moving forms, b = 0 for runs.
  static OneLinerSpec normalized(OneLinerSpec s) {
    if (is_pure_threshold(s.family) || s.family == Family::ConstRun) {
      s.u = 0;
      s.k = 1;
      s.c = 0.0;
    } else if (!is_general(s.family)) {
      s.u = 1;
    }
    if (s.family == Family::ConstRun)
      s.b = 0.0;
    else
      s.run_len = 3;
    return s;
  }

  friend bool operator==(const OneLinerSpec&, const OneLinerSpec&) = default;
};

inline void validate(const OneLinerSpec& s, Index n) {
  require(n >= 2, "one-liner needs a series of at least 2 samples");
  require(s.u == 0 || s.u == 1, "one-liner: u must be 0 or 1");
  require(std::isfinite(s.b), "one-liner: b must be finite");
  require(std::isfinite(s.c) && s.c >= 0.0, "one-liner: c must be a non-negative real");
  require(s.k >= 1, "one-liner: k must be >= 1");
  require(s.k <= n, "one-liner: window k=" + std::to_string(s.k) +
                        " exceeds series length " + std::to_string(n));
  if (s.family == Family::ConstRun) {
    require(s.run_len >= 2, "one-liner: run_len must be >= 2");
    require(s.run_len <= n, "one-liner: run_len=" + std::to_string(s.run_len) +
                                " exceeds series length " + std::to_string(n));
  }
}

/// Left-hand signal of the family: diff(TS) or abs(diff(TS)).
inline std::vector<double> family_signal(Family f, std::span<const double> d) {
  std::vector<double> x(d.begin(), d.end());
  if (uses_abs(f))
    for (double& v : x) v = std::abs(v);
  return x;
}

/// lhs - (u*movmean + c*movstd). The family's inequality is residual > b; the
/// search and apply_oneliner both compare this exact residual against b, so
/// they agree bit-for-bit on every threshold.
inline std::vector<double> residual(const OneLinerSpec& s, std::span<const double> x,
                                    std::span<const double> mm, std::span<const double> ms) {
  std::vector<double> r(x.begin(), x.end());
  if (is_pure_threshold(s.family)) return r;
  const double u = static_cast<double>(s.u);
  for (Index i = 0; i < r.size(); ++i) r[i] = x[i] - (u * mm[i] + s.c * ms[i]);
  return r;
}

inline std::vector<double> residual(const OneLinerSpec& s, std::span<const double> d) {
  const auto x = family_signal(s.family, d);
  if (is_pure_threshold(s.family)) return x;
  return residual(s, x, moving_mean(x, s.k), moving_std(x, s.k));
}

/// Maximal runs of bit-identical consecutive samples: (start, length) pairs.
inline std::vector<std::pair<Index, Index>> constant_runs(std::span<const double> v) {
  std::vector<std::pair<Index, Index>> runs;
  Index start = 0;
  for (Index i = 1; i <= v.size(); ++i) {
    if (i == v.size() || v[i] != v[start]) {
      runs.emplace_back(start, i - start);
      start = i;
    }
  }
  return runs;
}

/// Sorted original indices the detector flags. A diff-space exceedance at i
/// flags original index i+1.
inline std::vector<Index> apply_oneliner(const OneLinerSpec& spec, std::span<const double> v) {
  validate(spec, v.size());
  std::vector<Index> flags;
  if (spec.family == Family::ConstRun) {
    for (auto [start, len] : constant_runs(v))
      if (len >= spec.run_len)
        for (Index i = start; i < start + len; ++i) flags.push_back(i);
    return flags;
  }
  const auto r = residual(spec, diff_series(v));
  for (Index i = 0; i < r.size(); ++i)
    if (r[i] > spec.b) flags.push_back(i + 1);
  return flags;
}

inline std::vector<Index> apply_oneliner(const OneLinerSpec& spec, const TimeSeries& ts) {
  return apply_oneliner(spec, ts.values());
}

// ---------------------------------------------------------------------------
// Solve criterion
// ---------------------------------------------------------------------------

struct SolveCriterion {
  Index w = 1;  // point tolerance in samples
};

/// Perfect detection under tolerance w: every labelled region (dilated by w)
/// holds a flag, and every flag lies within w of a labelled sample.
inline bool is_solved(std::span<const Index> flags, const LabelSet& labels,
                      const SolveCriterion& crit) {
  require(!labels.empty(), "is_solved: label set is empty");
  const Index n = labels.series_length();
  std::vector<Region> dilated;
  dilated.reserve(labels.region_count());
  for (const auto& r : labels.regions()) dilated.push_back(dilate_region(r, crit.w, n));

  std::vector<bool> hit(dilated.size(), false);
  for (Index f : flags) {
    bool near = false;
    for (Index j = 0; j < dilated.size(); ++j) {
      if (dilated[j].contains(f)) {
        hit[j] = true;
        near = true;
      }
    }
    if (!near) return false;
  }
  return std::all_of(hit.begin(), hit.end(), [](bool h) { return h; });
}

// ---------------------------------------------------------------------------
// Threshold candidates and brute-force search
// ---------------------------------------------------------------------------

/// Midpoints between consecutive distinct values of x, ascending. Above
/// max_count (0 = unlimited) the list is thinned to evenly spaced ranks, always
/// keeping the smallest and largest midpoints.
inline std::vector<double> threshold_candidates(std::span<const double> x, Index max_count) {
  require(!x.empty(), "threshold_candidates: empty input");
  std::vector<double> sorted(x.begin(), x.end());
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());

  std::vector<double> mids;
  if (sorted.size() < 2) return mids;
  mids.reserve(sorted.size() - 1);
  for (Index i = 0; i + 1 < sorted.size(); ++i) mids.push_back(sorted[i] + (sorted[i + 1] - sorted[i]) / 2.0);

  if (max_count == 0 || mids.size() <= max_count) return mids;
  require(max_count >= 2, "threshold_candidates: max_count must be >= 2 when thinning");
  std::vector<double> thinned;
  thinned.reserve(max_count);
  const double step = static_cast<double>(mids.size() - 1) / static_cast<double>(max_count - 1);
  for (Index j = 0; j < max_count; ++j) {
    const auto rank = static_cast<Index>(std::llround(static_cast<double>(j) * step));
    if (thinned.empty() || mids[rank] != thinned.back()) thinned.push_back(mids[rank]);
  }
  return thinned;
}

struct SearchGrid {
  std::vector<Index> k_candidates{3, 5, 10, 21, 50, 101};
  std::vector<double> c_candidates{0, 0.5, 1, 2, 3, 5, 10};
  Index max_b_candidates = 512;

  void validate() const {
    require(!k_candidates.empty() && !c_candidates.empty(), "search grid: empty candidate set");
    require(std::find(k_candidates.begin(), k_candidates.end(), Index{5}) != k_candidates.end(),
            "search grid: k candidates must include 5");
    require(std::find(c_candidates.begin(), c_candidates.end(), 0.0) != c_candidates.end(),
            "search grid: c candidates must include 0");
    for (Index k : k_candidates) require(k >= 1, "search grid: k must be >= 1");
    for (double c : c_candidates) require(std::isfinite(c) && c >= 0.0, "search grid: c must be >= 0");
    require(max_b_candidates == 0 || max_b_candidates >= 2, "search grid: max_b_candidates must be 0 or >= 2");
  }
};

namespace detail {

/// Open interval of offsets b that solve the labels for residual r:
/// solved(b) <=> lo <= b < hi. Empty when lo >= hi.
struct SolvingRange {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
};

inline SolvingRange solving_range(std::span<const double> r, const LabelSet& labels, Index w) {
  const Index n = labels.series_length();
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<bool> near(n, false);
  SolvingRange range;
  for (const auto& reg : labels.regions()) {
    const Region d = dilate_region(reg, w, n);
    for (Index i = d.start; i <= d.end; ++i) near[i] = true;
    // Original index i+1 in d  <=>  residual index i in [max(d.start,1)-1, d.end-1].
    double best = -kInf;
    if (d.end >= 1)
      for (Index i = std::max<Index>(d.start, 1) - 1; i <= d.end - 1; ++i) best = std::max(best, r[i]);
    range.hi = std::min(range.hi, best);
  }
  for (Index i = 0; i < r.size(); ++i)
    if (!near[i + 1]) range.lo = std::max(range.lo, r[i]);
  return range;
}

struct Candidate {
  OneLinerSpec spec;
  auto key() const { return std::make_tuple(spec.b, spec.k, spec.c, spec.u, spec.run_len); }
};

}  // namespace detail

/// First solving spec in the fixed search order: families as in kSearchOrder
/// (restricted to `families`), then ascending b, k, c, u within a family.
/// The result does not depend on `jobs`.
inline std::optional<OneLinerSpec> brute_force_search(const TimeSeries& ts, const LabelSet& labels,
                                                      std::span<const Family> families,
                                                      const SearchGrid& grid,
                                                      const SolveCriterion& crit, unsigned jobs = 1) {
  require(!labels.empty(), "brute_force_search: label set is empty");
  require(labels.series_length() == ts.size(), "brute_force_search: labels do not match series length");
  grid.validate();
  const Index n = ts.size();
  const auto d = diff_series(ts);

  struct Task {
    Family family;
    Index k;
    double c;
    int u;
  };
  std::vector<Task> tasks;
  for (Family f : kSearchOrder) {
    if (std::find(families.begin(), families.end(), f) == families.end()) continue;
    if (is_pure_threshold(f) || f == Family::ConstRun) {
      tasks.push_back({f, 1, 0.0, 0});
      continue;
    }
    for (Index k : grid.k_candidates) {
      if (k > n) continue;
      for (double c : grid.c_candidates) {
        if (is_general(f)) {
          tasks.push_back({f, k, c, 0});
          tasks.push_back({f, k, c, 1});
        } else {
          tasks.push_back({f, k, c, 1});
        }
      }
    }
  }

  // Moving statistics are shared by every (c, u) at the same (signal, k).
  const std::array<std::vector<double>, 2> signals = {family_signal(Family::DiffThresh, d),
                                                      family_signal(Family::AbsDiffThresh, d)};
  std::vector<std::pair<int, Index>> stat_keys;
  for (const auto& t : tasks)
    if (!is_pure_threshold(t.family) && t.family != Family::ConstRun)
      stat_keys.emplace_back(uses_abs(t.family) ? 1 : 0, t.k);
  std::sort(stat_keys.begin(), stat_keys.end());
  stat_keys.erase(std::unique(stat_keys.begin(), stat_keys.end()), stat_keys.end());
  std::vector<std::pair<std::vector<double>, std::vector<double>>> stats(stat_keys.size());
  parallel_for(stat_keys.size(), jobs, [&](Index i) {
    const auto& x = signals[stat_keys[i].first];
    stats[i] = {moving_mean(x, stat_keys[i].second), moving_std(x, stat_keys[i].second)};
  });

  std::vector<std::optional<detail::Candidate>> found(tasks.size());
  parallel_for(tasks.size(), jobs, [&](Index ti) {
    const Task& t = tasks[ti];
    if (t.family == Family::ConstRun) {
      std::vector<Index> lengths;
      for (auto [start, len] : constant_runs(ts.values()))
        if (len >= 2) lengths.push_back(len);
      std::sort(lengths.begin(), lengths.end());
      lengths.erase(std::unique(lengths.begin(), lengths.end()), lengths.end());
      for (Index len : lengths) {
        const auto spec = OneLinerSpec::const_run(len);
        if (is_solved(apply_oneliner(spec, ts), labels, crit)) {
          found[ti] = detail::Candidate{spec};
          return;
        }
      }
      return;
    }
    auto spec = OneLinerSpec::normalized({t.family, t.u, t.k, t.c, 0.0, 3});
    std::vector<double> r;
    if (is_pure_threshold(t.family)) {
      r = family_signal(t.family, d);
    } else {
      const int sig = uses_abs(t.family) ? 1 : 0;
      const auto it = std::lower_bound(stat_keys.begin(), stat_keys.end(), std::make_pair(sig, t.k));
      const auto& st = stats[static_cast<Index>(it - stat_keys.begin())];
      r = residual(spec, signals[sig], st.first, st.second);
    }
    const auto range = detail::solving_range(r, labels, crit.w);
    if (!(range.lo < range.hi)) return;
    const auto cands = threshold_candidates(r, grid.max_b_candidates);
    const auto it = std::lower_bound(cands.begin(), cands.end(), range.lo);
    if (it == cands.end() || !(*it < range.hi)) return;
    spec.b = *it;
    found[ti] = detail::Candidate{spec};
  });

  for (Family f : kSearchOrder) {
    std::optional<detail::Candidate> best;
    for (Index ti = 0; ti < tasks.size(); ++ti) {
      if (tasks[ti].family != f || !found[ti]) continue;
      if (!best || found[ti]->key() < best->key()) best = found[ti];
    }
    if (best) return best->spec;
  }
  return std::nullopt;
}

inline std::optional<OneLinerSpec> brute_force_search(const TimeSeries& ts, const LabelSet& labels,
                                                      const SearchGrid& grid = {},
                                                      const SolveCriterion& crit = {},
                                                      unsigned jobs = 1) {
  return brute_force_search(ts, labels, kSearchOrder, grid, crit, jobs);
}

struct SeriesTriviality {
  std::string series_id;
  std::optional<OneLinerSpec> spec;
  std::optional<std::string> error;
};

struct TrivialityReport {
  std::vector<SeriesTriviality> series;
  Index solved = 0;
  Index total = 0;
  double fraction = 0.0;
  std::map<Family, Index> solved_by_family;
};

struct LabeledSeries {
  TimeSeries series;
  LabelSet labels;
};

/// Runs the search over every series. A failing series is recorded with its
/// error and counted as unsolved.
inline TrivialityReport audit_triviality(std::span<const LabeledSeries> corpus,
                                         std::span<const Family> families, const SearchGrid& grid,
                                         const SolveCriterion& crit, unsigned jobs = 1) {
  require(!corpus.empty(), "audit_triviality: empty corpus");
  TrivialityReport report;
  report.series.resize(corpus.size());
  parallel_for(corpus.size(), jobs, [&](Index i) {
    auto& out = report.series[i];
    out.series_id = corpus[i].series.name();
    try {
      out.spec = brute_force_search(corpus[i].series, corpus[i].labels, families, grid, crit, 1);
    } catch (const Error& e) {
      out.error = e.what();
    }
  });
  report.total = corpus.size();
  for (const auto& s : report.series) {
    if (!s.spec) continue;
    ++report.solved;
    ++report.solved_by_family[s.spec->family];
  }
  report.fraction = static_cast<double>(report.solved) / static_cast<double>(report.total);
  return report;
}

// ---------------------------------------------------------------------------
// Expression rendering
// ---------------------------------------------------------------------------

inline std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

/// Human-readable form in MATLAB-like syntax, e.g. "abs(diff(TS)) > 5".
inline std::string to_expression(const OneLinerSpec& s) {
  if (s.family == Family::ConstRun)
    return "construn(TS) >= " + std::to_string(s.run_len);
  const std::string lhs = uses_abs(s.family) ? "abs(diff(TS))" : "diff(TS)";
  std::string rhs;
  if (!is_pure_threshold(s.family)) {
    const std::string k = std::to_string(s.k);
    std::string mean = "movmean(" + lhs + ", " + k + ")";
    if (is_general(s.family)) mean = std::to_string(s.u) + "*" + mean;
    rhs = mean + " + " + format_number(s.c) + "*movstd(" + lhs + ", " + k + ")";
  }
  if (rhs.empty()) return lhs + " > " + format_number(s.b);
  if (s.b < 0) return lhs + " > " + rhs + " - " + format_number(-s.b);
  return lhs + " > " + rhs + " + " + format_number(s.b);
}

}  // namespace tsaudit
