// tsaudit: batch auditing of anomaly-detection benchmarks, detector baselines,
// single-anomaly scoring and fixture generation.
//
// Exit status: 0 success, 1 usage error, 2 runtime error (I/O, malformed
// data), 3 audit found flaws while --fail-on-flaw was given.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tsaudit/tsaudit.hpp"

namespace fs = std::filesystem;
using namespace tsaudit;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitFlaws = 3;

// Bad flag values that CLI11 cannot check by itself.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

template <typename F>
auto as_usage(F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
}

std::optional<SeriesFormat> format_arg(const std::string& s) {
  if (s == "auto") return std::nullopt;
  const auto f = parse_format(s);
  if (!f) throw UsageError("unknown --format '" + s + "' (expected auto, ucr, csv or sidecar)");
  return f;
}

LoadedSeries load(const fs::path& path, const std::string& format) {
  const auto f = format_arg(format);
  return f ? load_series(path, *f) : load_series(path);
}

std::vector<fs::path> expand_inputs(const std::vector<std::string>& inputs) {
  std::vector<fs::path> files;
  for (const auto& in : inputs) {
    const fs::path p(in);
    if (fs::is_directory(p)) {
      const auto listed = list_series_files(p);
      if (listed.empty()) throw Error("directory '" + in + "' contains no series files");
      files.insert(files.end(), listed.begin(), listed.end());
    } else if (fs::exists(p)) {
      files.push_back(p);
    } else {
      throw Error("no such file or directory: '" + in + "'");
    }
  }
  return files;
}

std::vector<LoadedSeries> load_all(const std::vector<fs::path>& files, const std::string& format, unsigned jobs) {
  std::vector<std::optional<LoadedSeries>> slots(files.size());
  parallel_for(files.size(), jobs, [&](Index i) { slots[i] = load(files[i], format); });
  std::vector<LoadedSeries> out;
  out.reserve(files.size());
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

std::string g(double v, int digits = 6) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

std::string fixed3(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

std::string region_text(const Region& r) { return "[" + std::to_string(r.start) + ", " + std::to_string(r.end) + "]"; }

std::vector<Family> families_arg(const std::vector<std::string>& names) {
  if (names.empty()) return {kSearchOrder.begin(), kSearchOrder.end()};
  std::vector<Family> out;
  for (const auto& n : names) {
    const auto f = parse_family(n);
    if (!f) throw UsageError("unknown one-liner family '" + n + "'");
    if (std::find(out.begin(), out.end(), *f) == out.end()) out.push_back(*f);
  }
  // Searched simplest first regardless of the order given.
  std::vector<Family> ordered;
  for (Family f : kSearchOrder)
    if (std::find(out.begin(), out.end(), f) != out.end()) ordered.push_back(f);
  return ordered;
}

// Search-grid flags shared by audit and oneliner.
struct GridFlags {
  std::vector<Index> k;
  std::vector<double> c;
  std::optional<Index> max_b;

  void add(CLI::App* app) {
    app->add_option("--grid-k", k, "Moving-window lengths to search (default 3,5,10,21,50,101)")->delimiter(',');
    app->add_option("--grid-c", c, "Moving-std multipliers to search (default 0,0.5,1,2,3,5,10)")->delimiter(',');
    app->add_option("--max-b", max_b, "Cap on threshold candidates per configuration, 0 = unlimited (default 512)");
  }

  SearchGrid grid() const {
    SearchGrid g;
    if (!k.empty()) g.k_candidates = k;
    if (!c.empty()) g.c_candidates = c;
    if (max_b) g.max_b_candidates = *max_b;
    as_usage([&] {
      g.validate();
      return 0;
    });
    return g;
  }
};

// Listed in --help; the value is consumed by expand_config before parsing.
void add_config_flag(CLI::App* cmd) {
  static std::string sink;
  cmd->add_option("--config", sink, "key=value file whose keys are long flag names; command-line flags win");
}

// ---------------------------------------------------------------------------
// audit
// ---------------------------------------------------------------------------

struct AuditFlags {
  std::vector<std::string> inputs;
  std::string format = "auto";
  GridFlags grid;
  std::vector<std::string> families;
  std::vector<Index> tolerances{1};
  std::optional<Index> sublen;
  double alpha = 0.5;
  std::optional<Index> exclusion;
  Index topk = 3;
  Index slop = 100;
  Index sample = 256;
  double high_density = 1.0 / 3.0;
  Index sandwich_gap = 2;
  double rtf_threshold = kRunToFailureMeanPosition;
  std::string out;
  std::string plots;
  bool fail_on_flaw = false;
  unsigned jobs = 0;
  std::uint64_t seed = 0;
};

void add_audit(CLI::App& app, AuditFlags& f) {
  auto* cmd = app.add_subcommand("audit", "Audit labelled series for the four benchmark flaws");
  add_config_flag(cmd);
  cmd->add_option("inputs", f.inputs, "Series files or directories")->required();
  cmd->add_option("--format", f.format, "Input format: auto, ucr, csv, sidecar")->capture_default_str();
  f.grid.add(cmd);
  cmd->add_option("--families", f.families, "One-liner families to search (default all)")->delimiter(',');
  cmd->add_option("--tolerance,-w", f.tolerances, "Solve tolerance(s) w in samples")->delimiter(',')->capture_default_str();
  cmd->add_option("--sublen", f.sublen, "Subsequence length for discord and consistency scans (default min(64, n/4))");
  cmd->add_option("--alpha", f.alpha, "Consistency threshold as a fraction of the median NN distance")->capture_default_str();
  cmd->add_option("--exclusion", f.exclusion, "Discord exclusion zone (default sublen/2)");
  cmd->add_option("--topk", f.topk, "Discords kept per series")->capture_default_str();
  cmd->add_option("--slop", f.slop, "Scoring slop L for the last-point hit rate")->capture_default_str();
  cmd->add_option("--consistency-sample", f.sample, "Unlabelled subsequences sampled for the median NN distance")->capture_default_str();
  cmd->add_option("--high-density", f.high_density, "Labelled fraction that raises HIGH_DENSITY")->capture_default_str();
  cmd->add_option("--sandwich-gap", f.sandwich_gap, "Largest unlabelled gap between regions that raises SANDWICH")->capture_default_str();
  cmd->add_option("--rtf-threshold", f.rtf_threshold, "Mean relative position above which run-to-failure is flagged")->capture_default_str();
  cmd->add_option("--out", f.out, "Write the audit report (JSON) here");
  cmd->add_option("--plots", f.plots, "Write per-series plot bundles (TSV + SVG) into this directory");
  cmd->add_flag("--fail-on-flaw", f.fail_on_flaw, "Exit with status 3 when any flaw is found");
  cmd->add_option("--jobs,-j", f.jobs, "Worker threads, 0 = all cores")->capture_default_str();
  cmd->add_option("--seed", f.seed, "Seed for sampled steps")->capture_default_str();
}

void write_audit_plots(const fs::path& dir, const std::vector<LoadedSeries>& corpus, const AuditReport& report,
                       const AuditSettings& settings, unsigned jobs) {
  std::set<std::string> ids;
  for (const auto& s : corpus)
    if (!ids.insert(s.series.name()).second)
      throw Error("--plots: two inputs share the series id '" + s.series.name() + "'");
  fs::create_directories(dir);
  parallel_for(corpus.size(), jobs, [&](Index i) {
    const auto& item = corpus[i];
    const auto& rec = report.series[i];
    std::vector<NamedTrace> traces;
    if (!rec.discord.error) {
      DiscordParams p{rec.discord.sublen, settings.exclusion, kZnormEps};
      traces.push_back({"discord", discord_score(item.series, p, 1)});
    }
    for (const auto& t : rec.triviality)
      if (t.spec) {
        traces.push_back({"oneliner", oneliner_trace(*t.spec, item.series)});
        break;
      }
    const auto base = dir / item.series.name();
    write_plot_bundle(item.series, item.labels, traces, base.string() + ".tsv", item.timestamps);
    write_text(base.string() + ".svg", render_svg(item.series, item.labels, traces));
  });
}

int run_audit_cmd(const AuditFlags& f) {
  AuditSettings s;
  s.grid = f.grid.grid();
  s.families = families_arg(f.families);
  s.tolerances = f.tolerances;
  if (s.tolerances.empty()) throw UsageError("--tolerance needs at least one value");
  s.sublen = f.sublen;
  s.alpha = f.alpha;
  s.consistency_sample = f.sample;
  s.exclusion = f.exclusion;
  s.discord_top_k = f.topk;
  s.slop = f.slop;
  s.density.high_density_fraction = f.high_density;
  s.density.sandwich_gap = f.sandwich_gap;
  s.run_to_failure_threshold = f.rtf_threshold;
  s.seed = f.seed;
  if (!(f.alpha > 0.0)) throw UsageError("--alpha must be positive");
  if (f.sublen && *f.sublen < 4) throw UsageError("--sublen must be >= 4");
  if (f.sample == 0) throw UsageError("--consistency-sample must be positive");

  const auto files = expand_inputs(f.inputs);
  auto loaded = load_all(files, f.format, f.jobs);
  std::vector<LabeledSeries> corpus;
  corpus.reserve(loaded.size());
  for (Index i = 0; i < loaded.size(); ++i) {
    if (!loaded[i].labels || loaded[i].labels->empty())
      throw Error(files[i].string() + ": no labelled anomalies; audit needs labelled series");
    corpus.push_back({loaded[i].series, *loaded[i].labels});
  }

  const auto report = run_audit(corpus, s, f.jobs);
  if (!f.out.empty()) write_report(report, f.out);
  if (!f.plots.empty()) write_audit_plots(f.plots, loaded, report, s, f.jobs);

  // Summary table.
  std::size_t idw = 6;
  for (const auto& r : report.series) idw = std::max(idw, r.series_id.size());
  std::printf("%-*s %8s %7s %-5s %-40s %s\n", static_cast<int>(idw), "series", "n", "regions", "w", "one-liner", "flags");
  for (const auto& r : report.series) {
    std::string w = "-", expr = "none";
    for (const auto& t : r.triviality)
      if (t.spec) {
        w = std::to_string(t.w);
        expr = to_expression(*t.spec);
        break;
      }
    std::string flags;
    for (Flag fl : r.flags) flags += (flags.empty() ? "" : ",") + std::string(flag_name(fl));
    std::printf("%-*s %8zu %7zu %-5s %-40s %s\n", static_cast<int>(idw), r.series_id.c_str(), r.n, r.regions.size(),
                w.c_str(), expr.c_str(), flags.empty() ? "-" : flags.c_str());
  }
  const auto& a = report.aggregates;
  std::printf("\ncorpus: %zu series\n", a.series_count);
  for (const auto& [w, solved] : a.solved_by_w)
    std::printf("solved (w=%zu): %zu/%zu (%s)\n", w, solved, a.series_count, fixed3(a.solved_fraction_by_w.at(w)).c_str());
  std::printf("mean relative position: %s, last-point hit rate: %s (slop %zu)%s\n", fixed3(a.mean_position).c_str(),
              fixed3(a.last_point_hit_rate).c_str(), s.slop, a.run_to_failure ? ", RUN_TO_FAILURE" : "");
  std::printf("flag counts:");
  for (Flag fl : kAllFlags) std::printf(" %s=%zu", std::string(flag_name(fl)).c_str(), a.flag_counts.at(std::string(flag_name(fl))));
  std::printf("\n");

  if (f.fail_on_flaw) {
    for (const auto& [name, count] : a.flag_counts)
      if (count > 0) return kExitFlaws;
  }
  return 0;
}

// ---------------------------------------------------------------------------
// oneliner
// ---------------------------------------------------------------------------

struct OnelinerFlags {
  std::string file;
  std::string format = "auto";
  std::string family;
  std::string params;
  bool search = false;
  std::vector<std::string> families;
  Index tolerance = 1;
  GridFlags grid;
  unsigned jobs = 0;
};

void add_oneliner(CLI::App& app, OnelinerFlags& f) {
  auto* cmd = app.add_subcommand("oneliner", "Evaluate a one-liner, or search for one that solves a series");
  add_config_flag(cmd);
  cmd->add_option("file", f.file, "Series file")->required();
  cmd->add_option("--format", f.format, "Input format: auto, ucr, csv, sidecar")->capture_default_str();
  auto* fam = cmd->add_option("--family", f.family,
                              "Family to evaluate: abs-diff-thresh, diff-thresh, abs-diff-mov, diff-mov, general-abs, general, const-run");
  cmd->add_option("--params", f.params, "Parameters as key=value list, e.g. k=5,c=2,b=0.5 or run_len=3")->needs(fam);
  auto* search = cmd->add_flag("--search", f.search, "Search the grid for the simplest solving one-liner");
  search->excludes(fam);
  cmd->add_option("--families", f.families, "Families searched with --search (default all)")->delimiter(',');
  cmd->add_option("--tolerance,-w", f.tolerance, "Solve tolerance w in samples")->capture_default_str();
  f.grid.add(cmd);
  cmd->add_option("--jobs,-j", f.jobs, "Worker threads, 0 = all cores")->capture_default_str();
}

int run_oneliner_cmd(const OnelinerFlags& f) {
  if (!f.search && f.family.empty()) throw UsageError("oneliner needs --family or --search");
  const auto loaded = load(f.file, f.format);
  const SolveCriterion crit{f.tolerance};

  if (f.search) {
    if (!loaded.labels || loaded.labels->empty())
      throw Error(f.file + ": no labelled anomalies; --search needs labels");
    const auto families = families_arg(f.families);
    const auto grid = f.grid.grid();
    const auto spec = brute_force_search(loaded.series, *loaded.labels, families, grid, crit, f.jobs);
    if (spec)
      std::printf("%s\n", to_expression(*spec).c_str());
    else
      std::printf("no solving one-liner found\n");
    return 0;
  }

  const auto family = parse_family(f.family);
  if (!family) throw UsageError("unknown one-liner family '" + f.family + "'");
  const auto spec = as_usage([&] {
    auto s = parse_oneliner_params(*family, f.params);
    validate(s, loaded.series.size());
    return s;
  });
  const auto flags = apply_oneliner(spec, loaded.series);
  std::printf("%s\n", to_expression(spec).c_str());
  std::vector<bool> mask(loaded.series.size(), false);
  for (Index i : flags) mask[i] = true;
  const auto regions = regions_from_flags(mask).regions();
  std::printf("flagged: %zu samples in %zu regions\n", flags.size(), regions.size());
  for (const auto& r : regions) std::printf("  %s\n", region_text(r).c_str());
  if (loaded.labels && !loaded.labels->empty())
    std::printf("solved (w=%zu): %s\n", f.tolerance, is_solved(flags, *loaded.labels, crit) ? "yes" : "no");
  return 0;
}

// ---------------------------------------------------------------------------
// discord
// ---------------------------------------------------------------------------

struct DiscordFlags {
  std::string file;
  std::string format = "auto";
  std::optional<Index> sublen;
  std::optional<Index> exclusion;
  Index topk = 10;
  std::string out;
  std::string svg;
  unsigned jobs = 0;
};

void add_discord(CLI::App& app, DiscordFlags& f) {
  auto* cmd = app.add_subcommand("discord", "Discord score trace and top-k discords of a series");
  add_config_flag(cmd);
  cmd->add_option("file", f.file, "Series file")->required();
  cmd->add_option("--format", f.format, "Input format: auto, ucr, csv, sidecar")->capture_default_str();
  cmd->add_option("--sublen,-m", f.sublen, "Subsequence length m (default min(64, n/4))");
  cmd->add_option("--exclusion", f.exclusion, "Exclusion zone (default m/2)");
  cmd->add_option("--topk,-k", f.topk, "Number of discords printed")->capture_default_str();
  cmd->add_option("--out", f.out, "Write the plot bundle (TSV) here");
  cmd->add_option("--svg", f.svg, "Also write an SVG chart here");
  cmd->add_option("--jobs,-j", f.jobs, "Worker threads, 0 = all cores")->capture_default_str();
}

int run_discord_cmd(const DiscordFlags& f) {
  const auto loaded = load(f.file, f.format);
  const Index n = loaded.series.size();
  DiscordParams p;
  p.sublen = f.sublen.value_or(std::min<Index>(64, n / 4));
  p.exclusion = f.exclusion;
  as_usage([&] {
    validate(p, n);
    return 0;
  });
  const auto trace = discord_score(loaded.series, p, f.jobs);
  const auto top = top_k_discords(trace, f.topk, p.exclusion_zone());

  std::printf("discords (m=%zu, exclusion=%zu)\n", p.sublen, p.exclusion_zone());
  std::printf("%4s %10s %10s %12s%s\n", "rank", "start", "centre", "score", loaded.timestamps.empty() ? "" : "  timestamp");
  for (Index r = 0; r < top.size(); ++r) {
    const Index start = top[r];
    const Index centre = start + (p.sublen - 1) / 2;
    std::printf("%4zu %10zu %10zu %12s", r + 1, start, centre, g(trace.scores()[start], 9).c_str());
    if (!loaded.timestamps.empty()) std::printf("  %s", loaded.timestamps[centre].c_str());
    std::printf("\n");
  }
  const std::vector<NamedTrace> traces{{"discord", trace}};
  if (!f.out.empty()) write_plot_bundle(loaded.series, loaded.labels, traces, f.out, loaded.timestamps);
  if (!f.svg.empty()) write_text(f.svg, render_svg(loaded.series, loaded.labels, traces));
  return 0;
}

// ---------------------------------------------------------------------------
// score
// ---------------------------------------------------------------------------

struct ScoreFlags {
  std::vector<std::string> inputs;
  std::string format = "auto";
  std::string pred;
  std::string detector;
  std::optional<Index> sublen;
  Index slop = 100;
  std::string out;
  unsigned jobs = 0;
};

void add_score(CLI::App& app, ScoreFlags& f) {
  auto* cmd = app.add_subcommand("score", "Single-anomaly accuracy of predicted locations");
  add_config_flag(cmd);
  cmd->add_option("inputs", f.inputs, "Directory (or files) of labelled series, one anomaly each")->required();
  cmd->add_option("--format", f.format, "Input format: auto, ucr, csv, sidecar")->capture_default_str();
  auto* pred = cmd->add_option("--pred", f.pred, "Predictions file: one '<series id> <index>' per line");
  auto* det = cmd->add_option("--detector", f.detector,
                              "Predict with a built-in detector instead: discord, last-point, global-max, oneliner:<family>[:k=v...]");
  pred->excludes(det);
  cmd->add_option("--sublen,-m", f.sublen, "Subsequence length for --detector discord");
  cmd->add_option("--slop,-L", f.slop, "Slop L in samples")->capture_default_str();
  cmd->add_option("--out", f.out, "Write per-series verdicts (JSON) here");
  cmd->add_option("--jobs,-j", f.jobs, "Worker threads, 0 = all cores")->capture_default_str();
}

std::map<std::string, Index> read_predictions(const fs::path& path) {
  std::map<std::string, Index> preds;
  const std::string text = detail::read_file(path);
  detail::for_each_line(text, [&](std::string_view raw, Index line) {
    auto s = detail::trim(raw);
    if (s.empty() || s.front() == '#') return;
    const auto sep = s.find_first_of(" \t,");
    if (sep == std::string_view::npos) throw IngestError(path.string(), line, "expected '<series id> <index>'");
    const auto id = detail::trim(s.substr(0, sep));
    const auto idx_text = detail::trim(s.substr(sep + 1));
    const auto idx = parse_index(idx_text);
    if (!idx) throw IngestError(path.string(), line, "'" + std::string(idx_text) + "' is not a sample index");
    const auto key = series_id_from_path(fs::path(std::string(id)));
    if (!preds.emplace(key, *idx).second)
      throw IngestError(path.string(), line, "second prediction for series '" + key + "'");
  });
  return preds;
}

int run_score_cmd(const ScoreFlags& f) {
  if (f.pred.empty() && f.detector.empty()) throw UsageError("score needs --pred or --detector");
  LocationDetector detector;
  std::map<std::string, Index> preds;
  if (!f.pred.empty()) {
    preds = read_predictions(f.pred);
    detector = [&preds](const TimeSeries& ts) -> Index {
      const auto it = preds.find(ts.name());
      if (it == preds.end()) throw Error("no prediction in the predictions file");
      return it->second;
    };
  } else {
    DetectorOptions opts;
    opts.sublen = f.sublen;
    detector = as_location_detector(as_usage([&] { return make_trace_detector(f.detector, opts); }));
  }

  const auto files = expand_inputs(f.inputs);
  auto loaded = load_all(files, f.format, f.jobs);
  std::vector<ScoredSeries> corpus;
  for (Index i = 0; i < loaded.size(); ++i) {
    auto& l = loaded[i];
    if (l.ucr) {
      corpus.push_back({l.series, *l.ucr});
      continue;
    }
    if (!l.labels || l.labels->regions().size() != 1)
      throw Error(files[i].string() + ": scoring needs exactly one labelled region (or a UCR file name)");
    const auto r = l.labels->regions().front();
    corpus.push_back({l.series, UcrMeta{l.series.name(), l.series.train_end().value_or(0), r.start, r.end}});
  }

  const auto report = evaluate_detector(corpus, detector, ScoringConfig{f.slop}, f.jobs);
  for (const auto& v : report.verdicts)
    if (v.error) std::fprintf(stderr, "warning: %s: %s; counted as incorrect\n", v.series_id.c_str(), v.error->c_str());

  std::size_t idw = 6;
  for (const auto& v : report.verdicts) idw = std::max(idw, v.series_id.size());
  std::printf("%-*s %10s %8s %12s\n", static_cast<int>(idw), "series", "predicted", "correct", "proportional");
  for (const auto& v : report.verdicts)
    std::printf("%-*s %10s %8s %12s\n", static_cast<int>(idw), v.series_id.c_str(),
                v.predicted ? std::to_string(*v.predicted).c_str() : "-", v.correct ? "yes" : "no",
                v.correct_proportional ? "yes" : "no");
  std::printf("\naccuracy (slop=%zu): %s (%zu/%zu)\n", report.slop, fixed3(report.accuracy).c_str(), report.correct,
              report.total);
  std::printf("accuracy (slop=anomaly length): %s (%zu/%zu)\n", fixed3(report.accuracy_proportional).c_str(),
              report.correct_proportional, report.total);
  if (!f.out.empty()) write_text(f.out, render_json(accuracy_report_to_json(report)));
  return 0;
}

// ---------------------------------------------------------------------------
// inject
// ---------------------------------------------------------------------------

struct InjectFlags {
  std::string file;
  std::string format = "auto";
  std::string kind;
  std::uint64_t seed = 0;
  std::string out;
  std::optional<Index> location;
  double magnitude = 10.0;
  Index length = 50;
  std::optional<double> value;
  std::optional<Index> donor;
  std::optional<Index> period;
  std::optional<Index> train_end;
};

void add_inject(CLI::App& app, InjectFlags& f) {
  auto* cmd = app.add_subcommand("inject", "Insert one synthetic anomaly with exact ground truth");
  add_config_flag(cmd);
  cmd->add_option("file", f.file, "Clean series file")->required();
  cmd->add_option("--format", f.format, "Input format: auto, ucr, csv, sidecar")->capture_default_str();
  cmd->add_option("--kind", f.kind, "Anomaly kind: spike, dropout, freeze, cycle-splice")->required();
  cmd->add_option("--seed", f.seed, "Seed for random placement")->capture_default_str();
  cmd->add_option("--out", f.out, "Output series; labels go to <out>.regions.json")->required();
  cmd->add_option("--location", f.location, "Start index (default: random inside the test part)");
  cmd->add_option("--magnitude", f.magnitude, "Spike height / dropout depth in series standard deviations")->capture_default_str();
  cmd->add_option("--length", f.length, "Dropout and freeze length")->capture_default_str();
  cmd->add_option("--value", f.value, "Explicit dropout level");
  cmd->add_option("--donor", f.donor, "Cycle-splice donor start (default: random in the training part)");
  cmd->add_option("--period", f.period, "Cycle length for cycle-splice (default: estimated)");
  cmd->add_option("--train-end", f.train_end, "Training split for inputs that carry none");
}

int run_inject_cmd(const InjectFlags& f) {
  const auto kind = parse_injection_kind(f.kind);
  if (!kind) throw UsageError("unknown --kind '" + f.kind + "' (expected spike, dropout, freeze or cycle-splice)");
  auto loaded = load(f.file, f.format);
  if (loaded.labels && !loaded.labels->empty())
    std::fprintf(stderr, "warning: %s: existing labels are not carried into the output\n", f.file.c_str());
  TimeSeries clean = loaded.series;
  if (f.train_end) clean = as_usage([&] { return TimeSeries(clean.name(), {clean.values().begin(), clean.values().end()}, f.train_end); });

  InjectionSpec spec;
  spec.kind = *kind;
  spec.location = f.location;
  spec.magnitude = f.magnitude;
  spec.length = f.length;
  spec.value = f.value;
  spec.donor_start = f.donor;
  spec.period = f.period;
  spec.seed = f.seed;
  const auto inj = as_usage([&] { return inject_anomaly(clean, spec); });

  write_single_column(f.out, inj.series.values());
  write_sidecar(f.out, {inj.region}, inj.series.train_end());
  std::printf("injected %s at %s into %s\n", std::string(injection_name(*kind)).c_str(), region_text(inj.region).c_str(),
              f.out.c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// probe
// ---------------------------------------------------------------------------

struct ProbeFlags {
  std::string file;
  std::string format = "auto";
  std::string detector = "discord";
  std::optional<Index> sublen;
  std::optional<Index> exclusion;
  std::vector<std::string> perturbations;
  std::string truth;
  std::uint64_t seed = 0;
  Index slop = 100;
  std::string out;
  unsigned jobs = 0;
};

void add_probe(CLI::App& app, ProbeFlags& f) {
  auto* cmd = app.add_subcommand("probe", "Check whether a detector's verdict survives perturbations");
  add_config_flag(cmd);
  cmd->add_option("file", f.file, "Labelled series file (one anomaly)")->required();
  cmd->add_option("--format", f.format, "Input format: auto, ucr, csv, sidecar")->capture_default_str();
  cmd->add_option("--detector", f.detector, "discord, last-point, global-max or oneliner:<family>[:k=v...]")->capture_default_str();
  cmd->add_option("--sublen,-m", f.sublen, "Subsequence length for the discord detector");
  cmd->add_option("--exclusion", f.exclusion, "Exclusion zone for the discord detector");
  cmd->add_option("--perturbations,-p", f.perturbations,
                  "Perturbations, e.g. gaussian-noise:sigma=0.1,amplitude-scale:3,offset:5,linear-trend:0.01,"
                  "wandering-baseline:0.1,uniform-scaling:1.2,dropout:100-120:0,freeze:100-120")
      ->delimiter(',')
      ->required();
  cmd->add_option("--truth", f.truth, "Ground-truth region START-END (default: the file's single labelled region)");
  cmd->add_option("--seed", f.seed, "Seed for random perturbations")->capture_default_str();
  cmd->add_option("--slop,-L", f.slop, "Slop L in samples")->capture_default_str();
  cmd->add_option("--out", f.out, "Write the probe report (JSON) here");
  cmd->add_option("--jobs,-j", f.jobs, "Worker threads, 0 = all cores")->capture_default_str();
}

int run_probe_cmd(const ProbeFlags& f) {
  std::vector<Perturbation> perturbations;
  for (const auto& p : f.perturbations) perturbations.push_back(as_usage([&] { return parse_perturbation(p); }));
  DetectorOptions opts;
  opts.sublen = f.sublen;
  opts.exclusion = f.exclusion;
  const auto detector = as_usage([&] { return make_trace_detector(f.detector, opts); });

  const auto loaded = load(f.file, f.format);
  Region truth;
  if (!f.truth.empty()) {
    truth = as_usage([&] { return detail::parse_region(f.truth, "--truth"); });
  } else {
    if (!loaded.labels || loaded.labels->regions().size() != 1)
      throw Error(f.file + ": probe needs exactly one labelled region (or --truth)");
    truth = loaded.labels->regions().front();
  }
  if (truth.end >= loaded.series.size()) throw UsageError("--truth lies outside the series");

  const auto report = invariance_probe(detector, loaded.series, truth, perturbations, f.slop, f.seed, f.jobs);
  std::size_t pw = 12;
  for (const auto& e : report.entries) pw = std::max(pw, e.perturbation.size());
  std::printf("truth %s, slop %zu, detector %s\n", region_text(truth).c_str(), f.slop, f.detector.c_str());
  std::printf("%-*s %8s %8s %10s %9s\n", static_cast<int>(pw), "perturbation", "before", "after", "hit_before", "hit_after");
  for (const auto& e : report.entries) {
    std::printf("%-*s %8s %8s %10s %9s", static_cast<int>(pw), e.perturbation.c_str(),
                e.argmax_before ? std::to_string(*e.argmax_before).c_str() : "-",
                e.argmax_after ? std::to_string(*e.argmax_after).c_str() : "-", e.hit_before ? "yes" : "no",
                e.hit_after ? "yes" : "no");
    if (e.error) std::printf("  error: %s", e.error->c_str());
    std::printf("\n");
  }
  if (!f.out.empty()) write_text(f.out, render_json(probe_report_to_json(report, f.detector)));
  return 0;
}

// ---------------------------------------------------------------------------
// --config
// ---------------------------------------------------------------------------

// Appends "--key value" for every entry of a key=value file whose flag is not
// already on the command line. Keys are long flag names without dashes.
std::vector<std::string> expand_config(std::vector<std::string> args, CLI::App& app) {
  std::optional<std::string> path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config") {
      if (i + 1 >= args.size()) throw UsageError("--config needs a file name");
      path = args[i + 1];
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i) + 2);
      break;
    }
    if (args[i].starts_with("--config=")) {
      path = args[i].substr(9);
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
      break;
    }
  }
  if (!path) return args;
  if (args.empty()) throw UsageError("--config must follow a subcommand");
  CLI::App* sub = nullptr;
  try {
    sub = app.get_subcommand(args.front());
  } catch (const CLI::OptionNotFound&) {
    throw UsageError("--config must follow a subcommand");
  }

  std::ifstream in(*path);
  if (!in) throw Error("cannot open config file '" + *path + "'");
  const auto items = CLI::ConfigINI().from_config(in);
  for (const auto& item : items) {
    if (item.name == "++" || item.name == "--") continue;  // section markers
    if (item.fullname() == "config") throw UsageError("config file '" + *path + "': nested config is not supported");
    const std::string flag = "--" + item.fullname();
    const CLI::Option* opt = sub->get_option_no_throw(flag);
    if (!opt || opt->get_positional()) throw UsageError("config file '" + *path + "': unknown key '" + item.fullname() + "'");
    // Any spelling on the command line wins: --name, --name=v, -x, -xv.
    const bool given = std::any_of(args.begin(), args.end(), [&](const std::string& a) {
      for (const auto& l : opt->get_lnames())
        if (a == "--" + l || a.starts_with("--" + l + "=")) return true;
      for (const auto& s : opt->get_snames())
        if (a.starts_with("-" + s) && !a.starts_with("--")) return true;
      return false;
    });
    if (given) continue;
    if (opt->get_expected_min() == 0) {
      const std::string v = item.inputs.empty() ? "true" : item.inputs.front();
      if (v == "true" || v == "1" || v == "yes" || v == "on") args.push_back(flag);
      else if (!(v == "false" || v == "0" || v == "no" || v == "off"))
        throw UsageError("config file '" + *path + "': '" + item.fullname() + "' expects true or false");
      continue;
    }
    std::string joined;
    for (const auto& v : item.inputs) joined += (joined.empty() ? "" : ",") + v;
    args.push_back(flag);
    args.push_back(joined);
  }
  return args;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tsaudit: audit time series anomaly benchmarks for trivial, dense, mislabelled and run-to-failure series"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Help for every subcommand");
  app.footer(
      "Every subcommand also accepts --config FILE: key=value lines whose keys are long flag names.\n"
      "Exit status: 0 ok, 1 usage error, 2 runtime error, 3 flaws found with --fail-on-flaw.");

  AuditFlags audit;
  OnelinerFlags oneliner;
  DiscordFlags discord;
  ScoreFlags score;
  InjectFlags inject;
  ProbeFlags probe;
  add_audit(app, audit);
  add_oneliner(app, oneliner);
  add_discord(app, discord);
  add_score(app, score);
  add_inject(app, inject);
  add_probe(app, probe);

  try {
    std::vector<std::string> args(argv + 1, argv + argc);
    args = expand_config(std::move(args), app);
    std::reverse(args.begin(), args.end());  // CLI11 consumes from the back
    try {
      app.parse(args);
    } catch (const CLI::ParseError& e) {
      const int rc = app.exit(e);
      return rc == 0 ? 0 : kExitUsage;
    }

    if (app.got_subcommand("audit")) return run_audit_cmd(audit);
    if (app.got_subcommand("oneliner")) return run_oneliner_cmd(oneliner);
    if (app.got_subcommand("discord")) return run_discord_cmd(discord);
    if (app.got_subcommand("score")) return run_score_cmd(score);
    if (app.got_subcommand("inject")) return run_inject_cmd(inject);
    if (app.got_subcommand("probe")) return run_probe_cmd(probe);
    return kExitUsage;
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
}
