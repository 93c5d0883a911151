#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "tsaudit/core.hpp"

namespace tsaudit {

struct NamedTrace {
  std::string name;
  ScoreTrace trace;
};

namespace detail {

inline std::string g9(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

inline void check_trace_names(const std::vector<NamedTrace>& traces, bool with_timestamps) {
  std::set<std::string> seen{"index", "value", "label"};
  if (with_timestamps) seen.insert("timestamp");
  for (const auto& t : traces) {
    if (t.name.empty() || t.name.find_first_of("\t\r\n") != std::string::npos)
      throw PreconditionError("plot bundle: trace name '" + t.name + "' is empty or contains a tab/newline");
    if (!seen.insert(t.name).second)
      throw PreconditionError("plot bundle: trace name '" + t.name + "' collides with another column");
  }
}

}  // namespace detail

/// Tab-separated plot data, LF line endings. Header:
/// "index\tvalue\tlabel[\ttimestamp]\t<trace names...>". Each trace value is
/// written at the sample its alignment places it on; other cells stay empty.
/// The label column is 0/1, or empty when the series has no labels.
inline std::string render_plot_bundle(const TimeSeries& ts, const std::optional<LabelSet>& labels,
                                      const std::vector<NamedTrace>& traces,
                                      const std::vector<std::string>& timestamps = {}) {
  const Index n = ts.size();
  const bool with_ts = !timestamps.empty();
  require(!with_ts || timestamps.size() == n, "plot bundle: timestamp count does not match series length");
  require(!labels || labels->series_length() == n, "plot bundle: labels do not match series length");
  detail::check_trace_names(traces, with_ts);
  for (const auto& t : traces)
    require(t.trace.series_length() == n, "plot bundle: trace '" + t.name + "' belongs to a different series length");

  std::string out = "index\tvalue\tlabel";
  if (with_ts) out += "\ttimestamp";
  for (const auto& t : traces) out += "\t" + t.name;
  out += "\n";
  for (Index i = 0; i < n; ++i) {
    out += std::to_string(i);
    out += "\t" + detail::g9(ts[i]);
    out += "\t";
    if (labels) out += labels->contains(i) ? "1" : "0";
    if (with_ts) out += "\t" + timestamps[i];
    for (const auto& t : traces) {
      out += "\t";
      if (const auto k = t.trace.trace_index_at(i)) out += detail::g9(t.trace.scores()[*k]);
    }
    out += "\n";
  }
  return out;
}

inline void write_plot_bundle(const TimeSeries& ts, const std::optional<LabelSet>& labels,
                              const std::vector<NamedTrace>& traces, const std::filesystem::path& path,
                              const std::vector<std::string>& timestamps = {}) {
  const std::string text = render_plot_bundle(ts, labels, traces, timestamps);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write plot bundle '" + path.string() + "'");
  out << text;
}

/// Standalone SVG line chart: the series on top with labelled samples shaded,
/// one panel per trace underneath.
inline std::string render_svg(const TimeSeries& ts, const std::optional<LabelSet>& labels,
                              const std::vector<NamedTrace>& traces) {
  const double width = 1000.0, panel = 160.0, gap = 20.0, margin = 10.0;
  const Index n = ts.size();
  const double height = margin * 2 + panel * static_cast<double>(1 + traces.size()) +
                        gap * static_cast<double>(traces.size());
  const double xscale = (width - 2 * margin) / static_cast<double>(n - 1);
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  auto polyline = [&](auto value_at, Index from, Index to, double top, const char* colour) {
    double lo = value_at(from), hi = lo;
    for (Index i = from; i <= to; ++i) lo = std::min(lo, value_at(i)), hi = std::max(hi, value_at(i));
    const double span = hi > lo ? hi - lo : 1.0;
    svg << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1\" points=\"";
    for (Index i = from; i <= to; ++i) {
      const double y = top + panel - (value_at(i) - lo) / span * panel;
      svg << detail::g9(margin + static_cast<double>(i) * xscale) << "," << detail::g9(y) << " ";
    }
    svg << "\"/>\n";
  };

  if (labels)
    for (const auto& r : labels->regions())
      svg << "<rect x=\"" << detail::g9(margin + static_cast<double>(r.start) * xscale) << "\" y=\"" << margin
          << "\" width=\"" << detail::g9(std::max(1.0, static_cast<double>(r.length() - 1) * xscale))
          << "\" height=\"" << panel << "\" fill=\"#f4b6b6\"/>\n";
  polyline([&](Index i) { return ts[i]; }, 0, n - 1, margin, "#1f4e9c");

  double top = margin + panel + gap;
  for (const auto& t : traces) {
    const auto& tr = t.trace;
    const Index first = tr.placed_index(0), last = tr.placed_index(tr.size() - 1);
    polyline([&](Index i) { return tr.scores()[*tr.trace_index_at(i)]; }, first, last, top, "#2e7d32");
    svg << "<text x=\"" << margin << "\" y=\"" << top + 12 << "\" font-size=\"12\">" << t.name << "</text>\n";
    top += panel + gap;
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace tsaudit
