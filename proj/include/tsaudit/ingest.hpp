#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "tsaudit/core.hpp"
#include "tsaudit/scoring.hpp"

namespace tsaudit {

/// Supported series files.
///  - UcrSingleColumn: whitespace-separated numbers (normally one per line);
///    split and anomaly come from the UCR file name.
///  - CsvValueLabel: comma-separated value[,label] rows with an optional
///    leading timestamp column and an optional header row. Labels are 0/1 per
///    point; each maximal run of 1s is one inclusive region.
///  - RegionsSidecar: a CSV series without labels plus "<file>.regions.json"
///    holding {"regions": [[start, end], ...], "train_end": k?} with inclusive ends.
enum class SeriesFormat { UcrSingleColumn, CsvValueLabel, RegionsSidecar };

inline std::string_view format_name(SeriesFormat f) {
  switch (f) {
    case SeriesFormat::UcrSingleColumn: return "ucr";
    case SeriesFormat::CsvValueLabel: return "csv";
    case SeriesFormat::RegionsSidecar: return "sidecar";
  }
  return "?";
}

inline std::optional<SeriesFormat> parse_format(std::string_view s) {
  if (s == "ucr") return SeriesFormat::UcrSingleColumn;
  if (s == "csv") return SeriesFormat::CsvValueLabel;
  if (s == "sidecar") return SeriesFormat::RegionsSidecar;
  return std::nullopt;
}

/// Malformed file content; carries the file and 1-based line when known.
class IngestError : public ParseError {
public:
  IngestError(std::string source, std::optional<Index> line, const std::string& message)
      : ParseError(source + (line ? ":" + std::to_string(*line) : std::string()) + ": " + message),
        source_(std::move(source)),
        line_(line) {}
  const std::string& source() const noexcept { return source_; }
  std::optional<Index> line() const noexcept { return line_; }

private:
  std::string source_;
  std::optional<Index> line_;
};

struct LoadedSeries {
  TimeSeries series;
  std::optional<LabelSet> labels;
  std::vector<std::string> timestamps;  // preserved for display, unused in computation
  std::optional<UcrMeta> ucr;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

inline std::optional<double> to_number(std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) return std::nullopt;
  return v;
}

inline double require_sample(std::string_view token, const std::string& source, Index line) {
  const auto v = to_number(token);
  if (!v) throw IngestError(source, line, "non-numeric value '" + std::string(trim(token)) + "'");
  if (!std::isfinite(*v)) throw IngestError(source, line, "non-finite value '" + std::string(trim(token)) + "'");
  return *v;
}

inline std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  for (;;) {
    const auto at = line.find(sep);
    out.push_back(line.substr(0, at));
    if (at == std::string_view::npos) break;
    line.remove_prefix(at + 1);
  }
  return out;
}

inline std::string lower(std::string_view s) {
  std::string out(trim(s));
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

template <typename Fn>
void for_each_line(std::string_view content, Fn&& fn) {
  Index line_no = 0;
  while (!content.empty()) {
    const auto nl = content.find('\n');
    ++line_no;
    fn(content.substr(0, nl), line_no);
    if (nl == std::string_view::npos) break;
    content.remove_prefix(nl + 1);
  }
}

}  // namespace detail

/// Series stem used as identifier: file name without directory or extension.
inline std::string series_id_from_path(const std::filesystem::path& path) {
  return path.stem().string();
}

inline std::vector<double> parse_number_column(std::string_view content, const std::string& source) {
  std::vector<double> values;
  detail::for_each_line(content, [&](std::string_view line, Index no) {
    std::istringstream tokens{std::string(line)};
    std::string tok;
    while (tokens >> tok) values.push_back(detail::require_sample(tok, source, no));
  });
  if (values.empty()) throw IngestError(source, std::nullopt, "file contains no samples");
  return values;
}

inline LoadedSeries parse_ucr_series(std::string_view content, const std::string& filename) {
  const UcrMeta meta = parse_ucr_name(filename);
  auto values = parse_number_column(content, filename);
  const Index n = values.size();
  if (values.size() < 2) throw IngestError(filename, std::nullopt, "series needs at least 2 samples");
  if (meta.end >= n)
    throw IngestError(filename, std::nullopt,
                      "anomaly end " + std::to_string(meta.end) + " lies beyond series length " + std::to_string(n));
  const std::string id = series_id_from_path(filename);
  return {TimeSeries(id, std::move(values), meta.train_end), LabelSet({meta.region()}, n), {}, meta};
}

struct CsvTable {
  std::vector<double> values;
  std::vector<double> labels;
  std::vector<std::string> timestamps;
  bool has_labels = false;
};

inline CsvTable parse_csv_table(std::string_view content, const std::string& source) {
  CsvTable t;
  std::optional<Index> value_col, label_col, time_col;
  Index columns = 0;
  bool layout_known = false;

  detail::for_each_line(content, [&](std::string_view raw, Index no) {
    const auto line = detail::trim(raw);
    if (line.empty()) return;
    const auto fields = detail::split(line, ',');

    if (!layout_known) {
      layout_known = true;
      columns = fields.size();
      bool header = false;
      for (Index i = 0; i < fields.size(); ++i) {
        const auto name = detail::lower(fields[i]);
        if (name == "value") value_col = i, header = true;
        else if (name == "label" || name == "is_anomaly" || name == "anomaly") label_col = i;
        else if (name == "timestamp" || name == "timestamps" || name == "time") time_col = i;
      }
      if (header) return;
      label_col.reset();
      time_col.reset();
      // Headerless: [timestamp,] value [, label]; a non-numeric first field is a timestamp.
      Index first = 0;
      if (fields.size() >= 2 && !detail::to_number(fields[0])) time_col = 0, first = 1;
      if (fields.size() - first > 2)
        throw IngestError(source, no, "expected [timestamp,]value[,label] but found " +
                                          std::to_string(fields.size()) + " columns");
      value_col = first;
      if (fields.size() - first == 2) label_col = first + 1;
    }

    if (fields.size() != columns)
      throw IngestError(source, no, "expected " + std::to_string(columns) + " columns, found " +
                                        std::to_string(fields.size()));
    t.values.push_back(detail::require_sample(fields[*value_col], source, no));
    if (label_col) {
      const auto lab = detail::to_number(fields[*label_col]);
      if (!lab || (*lab != 0.0 && *lab != 1.0))
        throw IngestError(source, no, "label '" + std::string(detail::trim(fields[*label_col])) +
                                          "' is not 0 or 1");
      t.labels.push_back(*lab);
    }
    if (time_col) t.timestamps.emplace_back(detail::trim(fields[*time_col]));
  });
  if (!value_col && layout_known) throw IngestError(source, 1, "header has no 'value' column");
  if (t.values.empty()) throw IngestError(source, std::nullopt, "file contains no samples");
  t.has_labels = label_col.has_value();
  return t;
}

inline LoadedSeries parse_csv_series(std::string_view content, const std::string& source) {
  auto t = parse_csv_table(content, source);
  if (t.values.size() < 2) throw IngestError(source, std::nullopt, "series needs at least 2 samples");
  std::optional<LabelSet> labels;
  if (t.has_labels) {
    std::vector<bool> flags(t.labels.size());
    for (Index i = 0; i < flags.size(); ++i) flags[i] = t.labels[i] == 1.0;
    labels = regions_from_flags(flags);
  }
  return {TimeSeries(series_id_from_path(source), std::move(t.values)), std::move(labels),
          std::move(t.timestamps), std::nullopt};
}

inline std::filesystem::path sidecar_path(const std::filesystem::path& series_path) {
  return std::filesystem::path(series_path.string() + ".regions.json");
}

inline LoadedSeries parse_sidecar_series(std::string_view content, std::string_view sidecar,
                                         const std::string& source) {
  auto t = parse_csv_table(content, source);
  if (t.values.size() < 2) throw IngestError(source, std::nullopt, "series needs at least 2 samples");
  const Index n = t.values.size();
  const std::string side_name = source + ".regions.json";
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(sidecar);
  } catch (const nlohmann::json::parse_error& e) {
    throw IngestError(side_name, std::nullopt, std::string("invalid JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("regions") || !doc["regions"].is_array())
    throw IngestError(side_name, std::nullopt, "expected an object with a 'regions' array");
  std::vector<Region> regions;
  for (const auto& r : doc["regions"]) {
    if (!r.is_array() || r.size() != 2 || !r[0].is_number_unsigned() || !r[1].is_number_unsigned())
      throw IngestError(side_name, std::nullopt, "each region must be [start, end] with non-negative integers");
    const Region reg{r[0].get<Index>(), r[1].get<Index>()};
    if (reg.start > reg.end || reg.end >= n)
      throw IngestError(side_name, std::nullopt, "region [" + std::to_string(reg.start) + ", " +
                                                     std::to_string(reg.end) + "] outside series of length " +
                                                     std::to_string(n));
    regions.push_back(reg);
  }
  std::optional<Index> train_end;
  if (doc.contains("train_end") && !doc["train_end"].is_null()) {
    if (!doc["train_end"].is_number_unsigned())
      throw IngestError(side_name, std::nullopt, "train_end must be a non-negative integer");
    train_end = doc["train_end"].get<Index>();
    if (*train_end == 0 || *train_end >= n)
      throw IngestError(side_name, std::nullopt, "train_end must lie in (0, length)");
  }
  return {TimeSeries(series_id_from_path(source), std::move(t.values), train_end),
          LabelSet(std::move(regions), n), std::move(t.timestamps), std::nullopt};
}

/// Picks the format from the file itself: UCR names first, then a sidecar next
/// to the file, otherwise CSV.
inline SeriesFormat detect_format(const std::filesystem::path& path) {
  if (path.filename().string().find(kUcrPrefix) != std::string::npos) return SeriesFormat::UcrSingleColumn;
  if (std::filesystem::exists(sidecar_path(path))) return SeriesFormat::RegionsSidecar;
  return SeriesFormat::CsvValueLabel;
}

inline LoadedSeries load_series(const std::filesystem::path& path, SeriesFormat format) {
  const std::string content = detail::read_file(path);
  const std::string source = path.string();
  try {
    switch (format) {
      case SeriesFormat::UcrSingleColumn: return parse_ucr_series(content, source);
      case SeriesFormat::CsvValueLabel: return parse_csv_series(content, source);
      case SeriesFormat::RegionsSidecar:
        return parse_sidecar_series(content, detail::read_file(sidecar_path(path)), source);
    }
  } catch (const PreconditionError& e) {
    throw IngestError(source, std::nullopt, e.what());
  }
  throw Error("unknown series format");
}

inline LoadedSeries load_series(const std::filesystem::path& path) { return load_series(path, detect_format(path)); }

/// Lists series files under `dir` (sorted; sidecars and hidden files skipped).
inline std::vector<std::filesystem::path> list_series_files(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const auto name = e.path().filename().string();
    if (name.empty() || name.front() == '.') continue;
    if (name.ends_with(".regions.json") || name.ends_with(".json") || name.ends_with(".tsv") ||
        name.ends_with(".svg"))
      continue;
    files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

/// One sample per line, printed with round-trip precision.
inline void write_single_column(const std::filesystem::path& path, std::span<const double> values) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  char buf[40];
  for (double v : values) {
    std::snprintf(buf, sizeof buf, "%.17g\n", v);
    out << buf;
  }
}

inline void write_sidecar(const std::filesystem::path& series_path, const std::vector<Region>& regions,
                          std::optional<Index> train_end) {
  nlohmann::json doc;
  doc["regions"] = nlohmann::json::array();
  for (const auto& r : regions) doc["regions"].push_back({r.start, r.end});
  doc["train_end"] = train_end ? nlohmann::json(*train_end) : nlohmann::json(nullptr);
  std::ofstream out(sidecar_path(series_path), std::ios::binary);
  if (!out) throw Error("cannot write '" + sidecar_path(series_path).string() + "'");
  out << doc.dump(2) << "\n";
}

}  // namespace tsaudit
