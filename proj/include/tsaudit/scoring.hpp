#pragma once

#include <charconv>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tsaudit/core.hpp"
#include "tsaudit/parallel.hpp"

namespace tsaudit {

/// Metadata carried by a UCR-archive file name:
/// "<anything>UCR_Anomaly_<name>_<train_end>_<begin>_<end>[.ext]".
struct UcrMeta {
  std::string dataset_name;
  Index train_end = 0;
  Index begin = 0;
  Index end = 0;

  Region region() const noexcept { return Region{begin, end}; }
  friend bool operator==(const UcrMeta&, const UcrMeta&) = default;
};

enum class UcrNameErrorKind { MissingPrefix, TooFewIntegers, BeginAfterEnd, TrainNotBeforeBegin, ZeroTrainEnd };

class UcrNameError : public ParseError {
public:
  UcrNameError(UcrNameErrorKind kind, const std::string& what) : ParseError(what), kind_(kind) {}
  UcrNameErrorKind kind() const noexcept { return kind_; }

private:
  UcrNameErrorKind kind_;
};

inline constexpr std::string_view kUcrPrefix = "UCR_Anomaly_";

inline std::optional<Index> parse_index(std::string_view s) {
  if (s.empty()) return std::nullopt;
  Index v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) return std::nullopt;
  return v;
}

inline UcrMeta parse_ucr_name(std::string_view filename) {
  const std::string original(filename);
  if (const auto slash = filename.find_last_of("/\\"); slash != std::string_view::npos)
    filename.remove_prefix(slash + 1);
  // An extension is a trailing ".xxx" without underscores.
  if (const auto dot = filename.find_last_of('.');
      dot != std::string_view::npos && filename.find('_', dot) == std::string_view::npos)
    filename = filename.substr(0, dot);

  const auto at = filename.find(kUcrPrefix);
  if (at == std::string_view::npos)
    throw UcrNameError(UcrNameErrorKind::MissingPrefix,
                       "'" + original + "' does not contain '" + std::string(kUcrPrefix) + "'");
  std::string_view rest = filename.substr(at + kUcrPrefix.size());

  Index numbers[3] = {0, 0, 0};
  for (int slot = 2; slot >= 0; --slot) {
    const auto us = rest.find_last_of('_');
    const std::string_view token = us == std::string_view::npos ? rest : rest.substr(us + 1);
    const auto value = parse_index(token);
    if (!value || us == std::string_view::npos)
      throw UcrNameError(UcrNameErrorKind::TooFewIntegers,
                         "'" + original + "' does not end in <name>_<train_end>_<begin>_<end>");
    numbers[slot] = *value;
    rest = rest.substr(0, us);
  }

  UcrMeta meta{std::string(rest), numbers[0], numbers[1], numbers[2]};
  if (meta.begin > meta.end)
    throw UcrNameError(UcrNameErrorKind::BeginAfterEnd,
                       "'" + original + "': anomaly begin " + std::to_string(meta.begin) +
                           " is after end " + std::to_string(meta.end));
  if (meta.train_end == 0)
    throw UcrNameError(UcrNameErrorKind::ZeroTrainEnd, "'" + original + "': training length is zero");
  if (meta.train_end >= meta.begin)
    throw UcrNameError(UcrNameErrorKind::TrainNotBeforeBegin,
                       "'" + original + "': training prefix " + std::to_string(meta.train_end) +
                           " reaches the anomaly at " + std::to_string(meta.begin));
  return meta;
}

inline std::string render_ucr_name(const UcrMeta& m) {
  return std::string(kUcrPrefix) + m.dataset_name + "_" + std::to_string(m.train_end) + "_" +
         std::to_string(m.begin) + "_" + std::to_string(m.end);
}

/// Tolerance around the labelled anomaly, in samples.
struct ScoringConfig {
  Index slop = 100;
};

/// begin - slop <= pred <= end + slop, with the lower edge clamped at 0.
inline bool location_hit(Index pred, const Region& truth, Index slop) noexcept {
  const Index lo = truth.start >= slop ? truth.start - slop : 0;
  return lo <= pred && pred <= truth.end + slop;
}

inline bool score_location(Index pred, const UcrMeta& meta, const ScoringConfig& cfg) noexcept {
  return location_hit(pred, meta.region(), cfg.slop);
}

/// Single-anomaly detector: sees the series (name, samples, training split)
/// and returns one predicted index. It never sees the labels.
using LocationDetector = std::function<Index(const TimeSeries&)>;

struct ScoredSeries {
  TimeSeries series;
  UcrMeta meta;
};

struct SeriesVerdict {
  std::string series_id;
  std::optional<Index> predicted;
  bool correct = false;
  bool correct_proportional = false;  // slop = anomaly length
  std::optional<std::string> error;
};

struct AccuracyReport {
  Index slop = 0;
  std::vector<SeriesVerdict> verdicts;
  Index correct = 0;
  Index correct_proportional = 0;
  Index total = 0;
  double accuracy = 0.0;
  double accuracy_proportional = 0.0;
};

/// Binary verdict per series, aggregated as simple accuracy. A detector that
/// throws or predicts outside the series counts as incorrect.
inline AccuracyReport evaluate_detector(std::span<const ScoredSeries> corpus, const LocationDetector& detector,
                                        const ScoringConfig& cfg, unsigned jobs = 1) {
  require(!corpus.empty(), "evaluate_detector: empty corpus");
  AccuracyReport report;
  report.slop = cfg.slop;
  report.total = corpus.size();
  report.verdicts.resize(corpus.size());
  parallel_for(corpus.size(), jobs, [&](Index i) {
    const auto& item = corpus[i];
    auto& v = report.verdicts[i];
    v.series_id = item.series.name();
    try {
      const Index pred = detector(item.series);
      if (pred >= item.series.size()) {
        v.error = "prediction " + std::to_string(pred) + " outside series of length " +
                  std::to_string(item.series.size());
        return;
      }
      v.predicted = pred;
      v.correct = score_location(pred, item.meta, cfg);
      v.correct_proportional = location_hit(pred, item.meta.region(), item.meta.region().length());
    } catch (const std::exception& e) {
      v.error = e.what();
    }
  });
  for (const auto& v : report.verdicts) {
    report.correct += v.correct ? 1 : 0;
    report.correct_proportional += v.correct_proportional ? 1 : 0;
  }
  report.accuracy = static_cast<double>(report.correct) / static_cast<double>(report.total);
  report.accuracy_proportional =
      static_cast<double>(report.correct_proportional) / static_cast<double>(report.total);
  return report;
}

}  // namespace tsaudit
