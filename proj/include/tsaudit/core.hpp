#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <iterator>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tsaudit/error.hpp"

namespace tsaudit {

using Index = std::size_t;

/// A named univariate series of finite samples, optionally split into a
/// training prefix [0, train_end) and a test suffix.
class TimeSeries {
public:
  TimeSeries(std::string name, std::vector<double> values,
             std::optional<Index> train_end = std::nullopt)
      : name_(std::move(name)), values_(std::move(values)), train_end_(train_end) {
    require(values_.size() >= 2, "time series '" + name_ + "' needs at least 2 samples");
    for (Index i = 0; i < values_.size(); ++i) {
      if (!std::isfinite(values_[i]))
        throw PreconditionError("time series '" + name_ + "' has a non-finite sample at index " +
                                std::to_string(i));
    }
    if (train_end_) {
      require(*train_end_ > 0 && *train_end_ < values_.size(),
              "time series '" + name_ + "': train_end must lie in (0, length)");
    }
  }

  const std::string& name() const noexcept { return name_; }
  std::span<const double> values() const noexcept { return values_; }
  std::optional<Index> train_end() const noexcept { return train_end_; }
  Index size() const noexcept { return values_.size(); }
  double operator[](Index i) const { return values_[i]; }

  /// Training prefix; the whole series when no split is declared.
  std::span<const double> train() const noexcept {
    return std::span<const double>(values_).first(train_end_.value_or(values_.size()));
  }

  /// Same name and split, new samples. The split is dropped if it no longer fits.
  TimeSeries with_values(std::vector<double> values) const {
    auto split = train_end_;
    if (split && *split >= values.size()) split.reset();
    return TimeSeries(name_, std::move(values), split);
  }

private:
  std::string name_;
  std::vector<double> values_;
  std::optional<Index> train_end_;
};

/// Closed index interval [start, end].
struct Region {
  Index start = 0;
  Index end = 0;

  Index length() const noexcept { return end - start + 1; }
  bool contains(Index i) const noexcept { return start <= i && i <= end; }
  bool intersects(const Region& o) const noexcept { return start <= o.end && o.start <= end; }
  friend bool operator==(const Region&, const Region&) = default;
};

/// Widens `r` by `w` on both sides, clamped to [0, n-1].
inline Region dilate_region(const Region& r, Index w, Index n) {
  require(n > 0 && r.start <= r.end && r.end < n, "dilate_region: region outside series");
  return Region{r.start >= w ? r.start - w : 0, std::min(n - 1, r.end + w)};
}

/// Ground-truth anomalies as sorted, disjoint, non-adjacent regions.
class LabelSet {
public:
  LabelSet() = default;

  LabelSet(std::vector<Region> regions, Index series_length) : series_length_(series_length) {
    for (const auto& r : regions) {
      require(r.start <= r.end, "label region has start > end");
      require(r.end < series_length, "label region (" + std::to_string(r.start) + "," +
                                         std::to_string(r.end) + ") exceeds series length " +
                                         std::to_string(series_length));
    }
    std::sort(regions.begin(), regions.end(),
              [](const Region& a, const Region& b) { return a.start < b.start; });
    for (const auto& r : regions) {
      // Overlapping or adjacent runs collapse into one region.
      if (!regions_.empty() && r.start <= regions_.back().end + 1)
        regions_.back().end = std::max(regions_.back().end, r.end);
      else
        regions_.push_back(r);
    }
  }

  const std::vector<Region>& regions() const noexcept { return regions_; }
  Index series_length() const noexcept { return series_length_; }
  bool empty() const noexcept { return regions_.empty(); }
  Index region_count() const noexcept { return regions_.size(); }

  Index labeled_count() const noexcept {
    Index total = 0;
    for (const auto& r : regions_) total += r.length();
    return total;
  }

  bool contains(Index i) const noexcept {
    auto it = std::upper_bound(regions_.begin(), regions_.end(), i,
                               [](Index v, const Region& r) { return v < r.start; });
    return it != regions_.begin() && std::prev(it)->contains(i);
  }

  std::vector<bool> to_flags() const {
    std::vector<bool> flags(series_length_, false);
    for (const auto& r : regions_)
      for (Index i = r.start; i <= r.end; ++i) flags[i] = true;
    return flags;
  }

  friend bool operator==(const LabelSet&, const LabelSet&) = default;

private:
  std::vector<Region> regions_;
  Index series_length_ = 0;
};

/// Maximal runs of `true` become regions.
inline LabelSet regions_from_flags(const std::vector<bool>& flags) {
  require(!flags.empty(), "regions_from_flags: empty flag vector");
  std::vector<Region> regions;
  for (Index i = 0; i < flags.size(); ++i) {
    if (!flags[i]) continue;
    if (i == 0 || !flags[i - 1])
      regions.push_back(Region{i, i});
    else
      regions.back().end = i;
  }
  return LabelSet(std::move(regions), flags.size());
}

/// Where a subsequence-based producer places each score relative to its window.
enum class Alignment { SubseqStart, SubseqMiddle, SubseqEnd };

inline const char* to_string(Alignment a) {
  switch (a) {
    case Alignment::SubseqStart: return "SUBSEQ_START";
    case Alignment::SubseqMiddle: return "SUBSEQ_MIDDLE";
    case Alignment::SubseqEnd: return "SUBSEQ_END";
  }
  return "?";
}

/// Per-position anomaly scores. For subsequence traces, scores[t] belongs to
/// the window [t, t+m-1]; `alignment` says which sample of that window the
/// producer attaches the score to. Pointwise traces have m = 0.
class ScoreTrace {
public:
  ScoreTrace(std::vector<double> scores, Alignment alignment, Index subsequence_length,
             Index series_length)
      : scores_(std::move(scores)),
        alignment_(alignment),
        m_(subsequence_length),
        series_length_(series_length) {
    const Index expected = m_ > 0 ? (series_length >= m_ ? series_length - m_ + 1 : 0)
                                  : series_length;
    require(expected > 0 && scores_.size() == expected,
            "score trace length " + std::to_string(scores_.size()) +
                " does not match series length " + std::to_string(series_length) +
                " and subsequence length " + std::to_string(m_));
  }

  static ScoreTrace pointwise(std::vector<double> scores) {
    const Index n = scores.size();
    return ScoreTrace(std::move(scores), Alignment::SubseqStart, 0, n);
  }

  std::span<const double> scores() const noexcept { return scores_; }
  Alignment alignment() const noexcept { return alignment_; }
  Index subsequence_length() const noexcept { return m_; }
  Index series_length() const noexcept { return series_length_; }
  Index size() const noexcept { return scores_.size(); }

  /// Original-series sample the producer attached scores[t] to.
  Index placed_index(Index t) const noexcept {
    if (m_ == 0) return t;
    switch (alignment_) {
      case Alignment::SubseqStart: return t;
      case Alignment::SubseqMiddle: return t + (m_ - 1) / 2;
      case Alignment::SubseqEnd: return t + m_ - 1;
    }
    return t;
  }

  /// Inverse of placed_index; nullopt where no score lands on sample i.
  std::optional<Index> trace_index_at(Index i) const noexcept {
    const Index shift = placed_index(0);
    if (i < shift || i - shift >= scores_.size()) return std::nullopt;
    return i - shift;
  }

  /// Window of samples that scores[t] summarizes.
  Region span_of(Index t) const noexcept {
    return m_ == 0 ? Region{t, t} : Region{t, t + m_ - 1};
  }

  /// First index of the maximum score.
  Index argmax() const noexcept {
    return static_cast<Index>(std::max_element(scores_.begin(), scores_.end()) - scores_.begin());
  }

  /// Predicted anomaly location: centre of the highest-scoring window. Using
  /// the window centre removes the start/middle/end placement offset between
  /// producers.
  Index argmax_location() const noexcept {
    const Region s = span_of(argmax());
    return s.start + (s.end - s.start) / 2;
  }

private:
  std::vector<double> scores_;
  Alignment alignment_;
  Index m_;
  Index series_length_;
};

}  // namespace tsaudit
