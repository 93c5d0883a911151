#pragma once

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tsaudit/core.hpp"
#include "tsaudit/diagnostics.hpp"
#include "tsaudit/oneliner.hpp"
#include "tsaudit/perturb.hpp"
#include "tsaudit/scoring.hpp"

namespace tsaudit {

inline constexpr const char* kReportSchemaVersion = "1";

/// Rounds to 9 significant digits. Every real stored in a report passes
/// through here, so a written report re-reads to identical values.
inline double round9(double v) {
  if (!std::isfinite(v)) return v;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return std::strtod(buf, nullptr);
}

struct AuditSettings {
  SearchGrid grid;
  std::vector<Family> families{kSearchOrder.begin(), kSearchOrder.end()};
  std::vector<Index> tolerances{1};
  std::optional<Index> sublen;  // per series min(64, n/4) when unset
  double alpha = 0.5;
  Index consistency_sample = 256;
  std::optional<Index> exclusion;
  Index discord_top_k = 3;
  Index slop = 100;
  DensityThresholds density;
  double run_to_failure_threshold = kRunToFailureMeanPosition;
  std::uint64_t seed = 0;

  Index sublen_for(Index n) const { return sublen.value_or(std::min<Index>(64, n / 4)); }
};

struct TrivialityResult {
  Index w = 0;
  std::optional<OneLinerSpec> spec;
  std::optional<std::string> error;

  bool solved() const noexcept { return spec.has_value(); }
};

struct ConsistencySummary {
  Index sublen = 0;
  double median_nn_distance = 0.0;
  double threshold = 0.0;
  std::vector<ConsistencyFinding> findings;
  std::optional<std::string> error;
};

struct DiscordEntry {
  Index index = 0;  // subsequence start
  double score = 0.0;
};

struct DiscordSummary {
  Index sublen = 0;
  Index exclusion = 0;
  std::vector<DiscordEntry> top;
  std::optional<std::string> error;
};

struct SeriesRecord {
  std::string series_id;
  Index n = 0;
  std::optional<Index> train_end;
  std::vector<Region> regions;
  std::vector<TrivialityResult> triviality;  // one per tolerance w
  DensityMetrics density;
  std::vector<Flag> flags;
  ConsistencySummary consistency;
  DiscordSummary discord;
  double relative_position = 0.0;
  bool last_point_hit = false;
};

struct CorpusAggregates {
  Index series_count = 0;
  std::map<Index, Index> solved_by_w;
  std::map<Index, double> solved_fraction_by_w;
  std::map<Index, std::map<std::string, Index>> solved_by_family;
  double mean_position = 0.0;
  double last_point_hit_rate = 0.0;
  std::map<std::string, Index> flag_counts;
  bool run_to_failure = false;
};

struct AuditReport {
  std::string schema_version = kReportSchemaVersion;
  AuditSettings settings;
  std::vector<SeriesRecord> series;
  CorpusAggregates aggregates;
};

inline CorpusAggregates compute_aggregates(const AuditSettings& settings, const std::vector<SeriesRecord>& series) {
  CorpusAggregates a;
  a.series_count = series.size();
  for (Flag f : kAllFlags) a.flag_counts[std::string(flag_name(f))] = 0;
  for (Index w : settings.tolerances) {
    a.solved_by_w[w] = 0;
    a.solved_by_family[w];
  }
  double pos_sum = 0.0;
  Index hits = 0;
  for (const auto& s : series) {
    for (const auto& t : s.triviality) {
      if (!t.solved()) continue;
      ++a.solved_by_w[t.w];
      ++a.solved_by_family[t.w][std::string(family_name(t.spec->family))];
    }
    for (Flag f : s.flags) ++a.flag_counts[std::string(flag_name(f))];
    pos_sum += round9(s.relative_position);
    hits += s.last_point_hit ? 1 : 0;
  }
  if (!series.empty()) {
    const double count = static_cast<double>(series.size());
    for (const auto& [w, solved] : a.solved_by_w) a.solved_fraction_by_w[w] = round9(static_cast<double>(solved) / count);
    a.mean_position = round9(pos_sum / count);
    a.last_point_hit_rate = round9(static_cast<double>(hits) / count);
  }
  a.run_to_failure = !series.empty() && a.mean_position > settings.run_to_failure_threshold;
  if (a.run_to_failure) a.flag_counts[std::string(flag_name(Flag::RunToFailure))] = 1;
  return a;
}

// ---------------------------------------------------------------------------
// JSON mapping
// ---------------------------------------------------------------------------

namespace detail {

using nlohmann::json;

template <typename T>
json opt(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

inline json region_json(const Region& r) { return json::array({r.start, r.end}); }

inline Region region_from(const json& j) {
  if (!j.is_array() || j.size() != 2) throw ParseError("report: region must be [start, end]");
  return Region{j.at(0).get<Index>(), j.at(1).get<Index>()};
}

template <typename T>
std::optional<T> opt_from(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<T>();
}

inline json spec_json(const OneLinerSpec& s) {
  return {{"family", std::string(family_name(s.family))},
          {"u", s.u},
          {"k", s.k},
          {"c", round9(s.c)},
          {"b", round9(s.b)},
          {"run_len", s.run_len},
          {"expression", to_expression(s)}};
}

inline OneLinerSpec spec_from(const json& j) {
  const auto family = parse_family(j.at("family").get<std::string>());
  if (!family) throw ParseError("report: unknown one-liner family '" + j.at("family").get<std::string>() + "'");
  return OneLinerSpec{*family, j.at("u").get<int>(), j.at("k").get<Index>(), j.at("c").get<double>(),
                      j.at("b").get<double>(), j.at("run_len").get<Index>()};
}

inline json settings_json(const AuditSettings& s) {
  json families = json::array();
  for (Family f : s.families) families.push_back(std::string(family_name(f)));
  json c_candidates = json::array();
  for (double c : s.grid.c_candidates) c_candidates.push_back(round9(c));
  return {{"grid", {{"k_candidates", s.grid.k_candidates},
                    {"c_candidates", c_candidates},
                    {"max_b_candidates", s.grid.max_b_candidates}}},
          {"families", families},
          {"tolerances", s.tolerances},
          {"sublen", opt(s.sublen)},
          {"alpha", round9(s.alpha)},
          {"consistency_sample", s.consistency_sample},
          {"exclusion", opt(s.exclusion)},
          {"discord_top_k", s.discord_top_k},
          {"slop", s.slop},
          {"high_density_fraction", round9(s.density.high_density_fraction)},
          {"sandwich_gap", s.density.sandwich_gap},
          {"run_to_failure_threshold", round9(s.run_to_failure_threshold)},
          {"seed", s.seed}};
}

inline AuditSettings settings_from(const json& j) {
  AuditSettings s;
  s.grid.k_candidates = j.at("grid").at("k_candidates").get<std::vector<Index>>();
  s.grid.c_candidates = j.at("grid").at("c_candidates").get<std::vector<double>>();
  s.grid.max_b_candidates = j.at("grid").at("max_b_candidates").get<Index>();
  s.families.clear();
  for (const auto& f : j.at("families")) {
    const auto fam = parse_family(f.get<std::string>());
    if (!fam) throw ParseError("report: unknown family '" + f.get<std::string>() + "'");
    s.families.push_back(*fam);
  }
  s.tolerances = j.at("tolerances").get<std::vector<Index>>();
  s.sublen = opt_from<Index>(j, "sublen");
  s.alpha = j.at("alpha").get<double>();
  s.consistency_sample = j.at("consistency_sample").get<Index>();
  s.exclusion = opt_from<Index>(j, "exclusion");
  s.discord_top_k = j.at("discord_top_k").get<Index>();
  s.slop = j.at("slop").get<Index>();
  s.density.high_density_fraction = j.at("high_density_fraction").get<double>();
  s.density.sandwich_gap = j.at("sandwich_gap").get<Index>();
  s.run_to_failure_threshold = j.at("run_to_failure_threshold").get<double>();
  s.seed = j.at("seed").get<std::uint64_t>();
  return s;
}

inline json record_json(const SeriesRecord& r) {
  json regions = json::array();
  for (const auto& reg : r.regions) regions.push_back(region_json(reg));
  json triv = json::array();
  for (const auto& t : r.triviality)
    triv.push_back({{"w", t.w},
                    {"solved", t.solved()},
                    {"spec", t.spec ? spec_json(*t.spec) : json(nullptr)},
                    {"error", opt(t.error)}});
  json flags = json::array();
  for (Flag f : r.flags) flags.push_back(std::string(flag_name(f)));
  json findings = json::array();
  for (const auto& f : r.consistency.findings)
    findings.push_back({{"kind", std::string(finding_name(f.kind))},
                        {"location", region_json(f.location)},
                        {"reference", region_json(f.reference)},
                        {"distance", round9(f.distance)}});
  json top = json::array();
  for (const auto& d : r.discord.top) top.push_back({{"index", d.index}, {"score", round9(d.score)}});
  return {{"series_id", r.series_id},
          {"n", r.n},
          {"train_end", opt(r.train_end)},
          {"labels", {{"regions", regions},
                      {"region_count", r.density.region_count},
                      {"labeled_samples", r.density.labeled_samples}}},
          {"triviality", triv},
          {"density", {{"anomaly_fraction", round9(r.density.anomaly_fraction)},
                       {"region_count", r.density.region_count},
                       {"max_region_fraction", round9(r.density.max_region_fraction)},
                       {"min_inter_region_gap", opt(r.density.min_inter_region_gap)}}},
          {"flags", flags},
          {"consistency", {{"sublen", r.consistency.sublen},
                           {"median_nn_distance", round9(r.consistency.median_nn_distance)},
                           {"threshold", round9(r.consistency.threshold)},
                           {"findings", findings},
                           {"error", opt(r.consistency.error)}}},
          {"discord", {{"sublen", r.discord.sublen},
                       {"exclusion", r.discord.exclusion},
                       {"top", top},
                       {"error", opt(r.discord.error)}}},
          {"relative_position", round9(r.relative_position)},
          {"last_point_hit", r.last_point_hit}};
}

inline FindingKind finding_from(const std::string& s) {
  if (s == "FN_CANDIDATE") return FindingKind::FnCandidate;
  if (s == "FP_CANDIDATE") return FindingKind::FpCandidate;
  throw ParseError("report: unknown finding kind '" + s + "'");
}

inline SeriesRecord record_from(const json& j) {
  SeriesRecord r;
  r.series_id = j.at("series_id").get<std::string>();
  r.n = j.at("n").get<Index>();
  r.train_end = opt_from<Index>(j, "train_end");
  for (const auto& reg : j.at("labels").at("regions")) r.regions.push_back(region_from(reg));
  for (const auto& t : j.at("triviality")) {
    TrivialityResult tr;
    tr.w = t.at("w").get<Index>();
    if (!t.at("spec").is_null()) tr.spec = spec_from(t.at("spec"));
    tr.error = opt_from<std::string>(t, "error");
    if (t.at("solved").get<bool>() != tr.solved()) throw ParseError("report: 'solved' disagrees with 'spec'");
    r.triviality.push_back(std::move(tr));
  }
  const auto& d = j.at("density");
  r.density.anomaly_fraction = d.at("anomaly_fraction").get<double>();
  r.density.region_count = d.at("region_count").get<Index>();
  r.density.max_region_fraction = d.at("max_region_fraction").get<double>();
  r.density.min_inter_region_gap = opt_from<Index>(d, "min_inter_region_gap");
  r.density.labeled_samples = j.at("labels").at("labeled_samples").get<Index>();
  for (const auto& f : j.at("flags")) {
    const auto flag = parse_flag(f.get<std::string>());
    if (!flag) throw ParseError("report: unknown flag '" + f.get<std::string>() + "'");
    r.flags.push_back(*flag);
  }
  const auto& c = j.at("consistency");
  r.consistency.sublen = c.at("sublen").get<Index>();
  r.consistency.median_nn_distance = c.at("median_nn_distance").get<double>();
  r.consistency.threshold = c.at("threshold").get<double>();
  r.consistency.error = opt_from<std::string>(c, "error");
  for (const auto& f : c.at("findings"))
    r.consistency.findings.push_back({finding_from(f.at("kind").get<std::string>()), region_from(f.at("location")),
                                      region_from(f.at("reference")), f.at("distance").get<double>()});
  const auto& dc = j.at("discord");
  r.discord.sublen = dc.at("sublen").get<Index>();
  r.discord.exclusion = dc.at("exclusion").get<Index>();
  r.discord.error = opt_from<std::string>(dc, "error");
  for (const auto& t : dc.at("top")) r.discord.top.push_back({t.at("index").get<Index>(), t.at("score").get<double>()});
  r.relative_position = j.at("relative_position").get<double>();
  r.last_point_hit = j.at("last_point_hit").get<bool>();
  return r;
}

inline json aggregates_json(const CorpusAggregates& a) {
  json solved = json::object(), fraction = json::object(), by_family = json::object();
  for (const auto& [w, v] : a.solved_by_w) solved[std::to_string(w)] = v;
  for (const auto& [w, v] : a.solved_fraction_by_w) fraction[std::to_string(w)] = round9(v);
  for (const auto& [w, m] : a.solved_by_family) by_family[std::to_string(w)] = m;
  return {{"series_count", a.series_count},
          {"solved_by_w", solved},
          {"solved_fraction_by_w", fraction},
          {"solved_by_family", by_family},
          {"position_bias", {{"mean_position", round9(a.mean_position)},
                             {"last_point_hit_rate", round9(a.last_point_hit_rate)}}},
          {"flag_counts", a.flag_counts},
          {"run_to_failure", a.run_to_failure}};
}

inline CorpusAggregates aggregates_from(const json& j) {
  CorpusAggregates a;
  a.series_count = j.at("series_count").get<Index>();
  for (const auto& [k, v] : j.at("solved_by_w").items()) a.solved_by_w[std::stoul(k)] = v.get<Index>();
  for (const auto& [k, v] : j.at("solved_fraction_by_w").items()) a.solved_fraction_by_w[std::stoul(k)] = v.get<double>();
  for (const auto& [k, v] : j.at("solved_by_family").items())
    a.solved_by_family[std::stoul(k)] = v.get<std::map<std::string, Index>>();
  a.mean_position = j.at("position_bias").at("mean_position").get<double>();
  a.last_point_hit_rate = j.at("position_bias").at("last_point_hit_rate").get<double>();
  a.flag_counts = j.at("flag_counts").get<std::map<std::string, Index>>();
  a.run_to_failure = j.at("run_to_failure").get<bool>();
  return a;
}

}  // namespace detail

inline nlohmann::json report_to_json(const AuditReport& r) {
  nlohmann::json series = nlohmann::json::array();
  for (const auto& s : r.series) series.push_back(detail::record_json(s));
  return {{"schema_version", r.schema_version},
          {"settings", detail::settings_json(r.settings)},
          {"series", series},
          {"aggregates", detail::aggregates_json(r.aggregates)}};
}

/// Throws ParseError when the stored aggregates differ from a recomputation
/// over the stored per-series records.
inline void verify_aggregates(const AuditReport& r) {
  const auto expected = detail::aggregates_json(compute_aggregates(r.settings, r.series));
  const auto stored = detail::aggregates_json(r.aggregates);
  if (expected != stored)
    throw ParseError("report: corpus aggregates do not match the per-series records (expected " +
                     expected.dump() + ", found " + stored.dump() + ")");
}

inline AuditReport report_from_json(const nlohmann::json& j) {
  AuditReport r;
  try {
    if (!j.is_object() || !j.contains("schema_version")) throw ParseError("report: missing schema_version");
    r.schema_version = j.at("schema_version").get<std::string>();
    if (r.schema_version != kReportSchemaVersion)
      throw ParseError("report: schema version '" + r.schema_version + "' is not supported (expected '" +
                       kReportSchemaVersion + "')");
    r.settings = detail::settings_from(j.at("settings"));
    for (const auto& s : j.at("series")) r.series.push_back(detail::record_from(s));
    r.aggregates = detail::aggregates_from(j.at("aggregates"));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("report: malformed document: ") + e.what());
  }
  verify_aggregates(r);
  return r;
}

/// Canonical text: sorted keys, two-space indent, reals at 9 significant digits, LF.
inline std::string render_report(const AuditReport& r) {
  const auto j = report_to_json(r);
  report_from_json(j);  // re-reads and checks aggregates before anything is written
  return j.dump(2) + "\n";
}

inline void write_report(const AuditReport& r, const std::filesystem::path& path) {
  const std::string text = render_report(r);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write report '" + path.string() + "'");
  out << text;
}

inline AuditReport parse_report(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("report: invalid JSON: ") + e.what());
  }
  return report_from_json(j);
}

inline AuditReport read_report(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open report '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_report(ss.str());
}

/// Canonical text of any document: sorted keys, two-space indent, LF.
inline std::string render_json(const nlohmann::json& j) { return j.dump(2) + "\n"; }

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << text;
}

inline nlohmann::json probe_report_to_json(const ProbeReport& r, std::string_view detector) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : r.entries)
    entries.push_back({{"perturbation", e.perturbation},
                       {"argmax_before", detail::opt(e.argmax_before)},
                       {"argmax_after", detail::opt(e.argmax_after)},
                       {"hit_before", e.hit_before},
                       {"hit_after", e.hit_after},
                       {"error", detail::opt(e.error)}});
  return {{"schema_version", kReportSchemaVersion},
          {"detector", std::string(detector)},
          {"truth", detail::region_json(r.truth)},
          {"slop", r.slop},
          {"entries", entries}};
}

/// Per-series verdicts of the single-anomaly protocol.
inline nlohmann::json accuracy_report_to_json(const AccuracyReport& r) {
  nlohmann::json verdicts = nlohmann::json::array();
  for (const auto& v : r.verdicts)
    verdicts.push_back({{"series_id", v.series_id},
                        {"predicted", detail::opt(v.predicted)},
                        {"correct", v.correct},
                        {"correct_proportional", v.correct_proportional},
                        {"error", detail::opt(v.error)}});
  return {{"schema_version", kReportSchemaVersion},
          {"slop", r.slop},
          {"total", r.total},
          {"correct", r.correct},
          {"correct_proportional", r.correct_proportional},
          {"accuracy", round9(r.accuracy)},
          {"accuracy_proportional", round9(r.accuracy_proportional)},
          {"verdicts", verdicts}};
}

}  // namespace tsaudit
