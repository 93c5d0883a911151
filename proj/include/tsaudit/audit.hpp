#pragma once

#include <algorithm>
#include <span>
#include <string>
#include <vector>

#include "tsaudit/core.hpp"
#include "tsaudit/diagnostics.hpp"
#include "tsaudit/discord.hpp"
#include "tsaudit/oneliner.hpp"
#include "tsaudit/parallel.hpp"
#include "tsaudit/report.hpp"
#include "tsaudit/rng.hpp"

namespace tsaudit {

/// All four flaw analyses for one labelled series.
inline SeriesRecord audit_series(const TimeSeries& ts, const LabelSet& labels, const AuditSettings& s,
                                 std::uint64_t series_seed) {
  require(!labels.empty(), "series '" + ts.name() + "' has no labelled anomalies");
  require(labels.series_length() == ts.size(), "series '" + ts.name() + "': labels do not match series length");
  const Index n = ts.size();

  SeriesRecord rec;
  rec.series_id = ts.name();
  rec.n = n;
  rec.train_end = ts.train_end();
  rec.regions = labels.regions();

  bool trivial = false;
  for (Index w : s.tolerances) {
    TrivialityResult t;
    t.w = w;
    try {
      t.spec = brute_force_search(ts, labels, s.families, s.grid, SolveCriterion{w}, 1);
    } catch (const Error& e) {
      t.error = e.what();
    }
    trivial = trivial || t.solved();
    rec.triviality.push_back(std::move(t));
  }

  rec.density = density_metrics(labels);
  if (trivial) rec.flags.push_back(Flag::Trivial);
  for (Flag f : density_flags(rec.density, s.density)) rec.flags.push_back(f);

  const Index m = s.sublen_for(n);
  rec.consistency.sublen = m;
  try {
    const auto scan = label_consistency_scan(ts, labels, {m, s.alpha, s.consistency_sample, series_seed}, 1);
    rec.consistency.median_nn_distance = scan.median_nn_distance;
    rec.consistency.threshold = scan.threshold;
    rec.consistency.findings = scan.findings;
    if (!scan.findings.empty()) rec.flags.push_back(Flag::LabelInconsistency);
  } catch (const Error& e) {
    rec.consistency.error = e.what();
  }

  DiscordParams dp{m, s.exclusion, kZnormEps};
  rec.discord.sublen = m;
  rec.discord.exclusion = dp.exclusion_zone();
  try {
    const auto trace = discord_score(ts, dp, 1);
    for (Index idx : top_k_discords(trace, s.discord_top_k, dp.exclusion_zone()))
      rec.discord.top.push_back({idx, trace.scores()[idx]});
  } catch (const Error& e) {
    rec.discord.error = e.what();
  }

  const auto pb = position_bias(std::span<const LabelSet>(&labels, 1), s.slop);
  rec.relative_position = pb.relative_positions.front();
  rec.last_point_hit = pb.last_point_hit_rate == 1.0;
  return rec;
}

/// Audits a labelled corpus. Series run in parallel; each series' seed is
/// derived from (settings.seed, position), so the report does not depend on `jobs`.
inline AuditReport run_audit(std::span<const LabeledSeries> corpus, const AuditSettings& settings, unsigned jobs = 1) {
  require(!corpus.empty(), "audit: empty corpus");
  require(!settings.tolerances.empty(), "audit: no tolerance w given");
  require(!settings.families.empty(), "audit: no one-liner families selected");
  settings.grid.validate();
  AuditReport report;
  report.settings = settings;
  report.series.resize(corpus.size());
  parallel_for(corpus.size(), jobs, [&](Index i) {
    report.series[i] = audit_series(corpus[i].series, corpus[i].labels, settings, CounterRng(settings.seed, 7).at(i));
  });
  report.aggregates = compute_aggregates(settings, report.series);
  return report;
}

}  // namespace tsaudit
