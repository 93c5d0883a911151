#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tsaudit/core.hpp"
#include "tsaudit/discord.hpp"
#include "tsaudit/ingest.hpp"
#include "tsaudit/oneliner.hpp"
#include "tsaudit/perturb.hpp"

namespace tsaudit {

/// Reads "key=value" pairs separated by ',' or ':' into a spec of the given
/// family. Keys: u, k, c, b, run_len.
inline OneLinerSpec parse_oneliner_params(Family family, std::string_view text) {
  OneLinerSpec s;
  s.family = family;
  if (family == Family::AbsDiffMov || family == Family::DiffMov || is_general(family)) s.u = 1;
  while (!text.empty()) {
    const auto sep = text.find_first_of(",:");
    const auto item = detail::trim(text.substr(0, sep));
    text = sep == std::string_view::npos ? std::string_view{} : text.substr(sep + 1);
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string_view::npos) throw ParseError("one-liner parameter '" + std::string(item) + "' is not key=value");
    const auto key = detail::trim(item.substr(0, eq));
    const auto val = detail::trim(item.substr(eq + 1));
    const auto num = detail::to_number(val);
    if (!num || !std::isfinite(*num)) throw ParseError("one-liner parameter '" + std::string(key) + "' has a non-numeric value");
    auto as_count = [&]() -> Index {
      if (*num < 0 || *num != std::floor(*num)) throw ParseError("one-liner parameter '" + std::string(key) + "' must be a non-negative integer");
      return static_cast<Index>(*num);
    };
    if (key == "u") s.u = static_cast<int>(as_count());
    else if (key == "k") s.k = as_count();
    else if (key == "c") s.c = *num;
    else if (key == "b") s.b = *num;
    else if (key == "run_len") s.run_len = as_count();
    else throw ParseError("unknown one-liner parameter '" + std::string(key) + "'");
  }
  return OneLinerSpec::normalized(s);
}

/// Pointwise trace of a one-liner: residual - b at the flagged coordinate (so
/// the trace is positive exactly where the detector fires), or the constant
/// run length for run detectors.
inline ScoreTrace oneliner_trace(const OneLinerSpec& spec, const TimeSeries& ts) {
  validate(spec, ts.size());
  std::vector<double> scores(ts.size(), 0.0);
  if (spec.family == Family::ConstRun) {
    for (auto [start, len] : constant_runs(ts.values()))
      for (Index i = start; i < start + len; ++i) scores[i] = static_cast<double>(len) - static_cast<double>(spec.run_len) + 0.5;
    return ScoreTrace::pointwise(std::move(scores));
  }
  const auto r = residual(spec, diff_series(ts));
  for (Index i = 0; i < r.size(); ++i) scores[i + 1] = r[i] - spec.b;
  scores[0] = *std::min_element(scores.begin() + 1, scores.end());
  return ScoreTrace::pointwise(std::move(scores));
}

struct DetectorOptions {
  std::optional<Index> sublen;  // discord; min(64, n/4) when unset
  std::optional<Index> exclusion;
  unsigned jobs = 1;
};

/// Named score-producing detectors:
///   discord | last-point | global-max | oneliner:<family>[:key=value...]
inline TraceDetector make_trace_detector(std::string_view name, const DetectorOptions& opts = {}) {
  if (name == "discord") {
    return [opts](const TimeSeries& ts) {
      DiscordParams p;
      p.sublen = opts.sublen.value_or(std::min<Index>(64, ts.size() / 4));
      p.exclusion = opts.exclusion;
      return discord_score(ts, p, opts.jobs);
    };
  }
  if (name == "last-point") {
    return [](const TimeSeries& ts) {
      std::vector<double> s(ts.size());
      for (Index i = 0; i < s.size(); ++i) s[i] = static_cast<double>(i);
      return ScoreTrace::pointwise(std::move(s));
    };
  }
  if (name == "global-max") {
    return [](const TimeSeries& ts) {
      return ScoreTrace::pointwise(std::vector<double>(ts.values().begin(), ts.values().end()));
    };
  }
  if (name.starts_with("oneliner:")) {
    auto rest = name.substr(9);
    const auto colon = rest.find(':');
    const auto fam = parse_family(rest.substr(0, colon));
    if (!fam) throw ParseError("unknown one-liner family '" + std::string(rest.substr(0, colon)) + "'");
    const auto spec = parse_oneliner_params(*fam, colon == std::string_view::npos ? "" : rest.substr(colon + 1));
    return [spec](const TimeSeries& ts) { return oneliner_trace(spec, ts); };
  }
  throw ParseError("unknown detector '" + std::string(name) + "' (expected discord, last-point, global-max or oneliner:<family>)");
}

/// Location detector for the single-anomaly protocol: argmax of the trace,
/// taken at the centre of the winning window.
inline LocationDetector as_location_detector(TraceDetector d) {
  return [d = std::move(d)](const TimeSeries& ts) { return d(ts).argmax_location(); };
}

}  // namespace tsaudit
