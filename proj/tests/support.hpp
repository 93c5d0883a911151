#pragma once

// Reference implementations and fixture generators for the test suites.
// Oracles are written from the definitions, deliberately naive, and share no
// code with the library beyond its value types.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "tsaudit/tsaudit.hpp"

namespace tsaudit::testing {

// ---------------------------------------------------------------------------
// Oracles
// ---------------------------------------------------------------------------

// Window [i - floor((k-1)/2), i + ceil((k-1)/2)] clipped to [0, n).
inline std::vector<double> window_of(const std::vector<double>& x, std::size_t i, std::size_t k) {
  const long before = static_cast<long>((k - 1) / 2);
  const long after = static_cast<long>(k - 1) - before;
  std::vector<double> w;
  for (long j = static_cast<long>(i) - before; j <= static_cast<long>(i) + after; ++j)
    if (j >= 0 && j < static_cast<long>(x.size())) w.push_back(x[static_cast<std::size_t>(j)]);
  return w;
}

inline std::vector<double> oracle_movmean(const std::vector<double>& x, std::size_t k) {
  std::vector<double> out;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const auto w = window_of(x, i, k);
    long double s = 0;
    for (double v : w) s += v;
    out.push_back(static_cast<double>(s / static_cast<long double>(w.size())));
  }
  return out;
}

inline std::vector<double> oracle_movstd(const std::vector<double>& x, std::size_t k) {
  std::vector<double> out;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const auto w = window_of(x, i, k);
    if (w.size() < 2) {
      out.push_back(0.0);
      continue;
    }
    long double s = 0;
    for (double v : w) s += v;
    const long double mu = s / static_cast<long double>(w.size());
    long double ss = 0;
    for (double v : w) ss += (v - mu) * (v - mu);
    out.push_back(static_cast<double>(std::sqrt(ss / static_cast<long double>(w.size() - 1))));
  }
  return out;
}

// z-normalized copy with sample std; near-constant windows become zeros.
inline std::vector<long double> oracle_znorm(const std::vector<double>& x, std::size_t start, std::size_t m) {
  long double s = 0;
  for (std::size_t j = 0; j < m; ++j) s += x[start + j];
  const long double mu = s / static_cast<long double>(m);
  long double ss = 0;
  for (std::size_t j = 0; j < m; ++j) ss += (x[start + j] - mu) * (x[start + j] - mu);
  const long double sd = std::sqrt(ss / static_cast<long double>(m - 1));
  std::vector<long double> z(m, 0.0L);
  if (sd < 1e-8L) return z;
  for (std::size_t j = 0; j < m; ++j) z[j] = (x[start + j] - mu) / sd;
  return z;
}

// Triple loop: every window against every admissible window, sample by sample.
inline std::vector<double> oracle_discord(const std::vector<double>& x, std::size_t m, std::size_t excl) {
  const std::size_t count = x.size() - m + 1;
  std::vector<std::vector<long double>> z;
  for (std::size_t i = 0; i < count; ++i) z.push_back(oracle_znorm(x, i, m));
  std::vector<double> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    long double best = std::numeric_limits<long double>::infinity();
    for (std::size_t j = 0; j < count; ++j) {
      if ((i > j ? i - j : j - i) < excl) continue;
      long double d = 0;
      for (std::size_t t = 0; t < m; ++t) d += (z[i][t] - z[j][t]) * (z[i][t] - z[j][t]);
      best = std::min(best, d);
    }
    out[i] = static_cast<double>(std::sqrt(best));
  }
  return out;
}

struct OracleRegion {
  std::size_t start, end;
};

inline std::vector<OracleRegion> oracle_regions(const std::vector<bool>& flags) {
  std::vector<OracleRegion> out;
  bool open = false;
  for (std::size_t i = 0; i < flags.size(); ++i) {
    if (flags[i] && !open) {
      out.push_back({i, i});
      open = true;
    } else if (flags[i]) {
      out.back().end = i;
    } else {
      open = false;
    }
  }
  return out;
}

struct OracleDensity {
  std::size_t labeled = 0, regions = 0, longest = 0;
  std::optional<std::size_t> min_gap;
};

inline OracleDensity oracle_density(const std::vector<bool>& flags) {
  OracleDensity d;
  std::size_t run = 0, gap = 0;
  bool seen = false;
  for (std::size_t i = 0; i <= flags.size(); ++i) {
    const bool f = i < flags.size() && flags[i];
    if (f) {
      if (run == 0) {
        ++d.regions;
        if (seen) d.min_gap = std::min(d.min_gap.value_or(gap), gap);
      }
      ++run;
      ++d.labeled;
      gap = 0;
      seen = true;
    } else {
      d.longest = std::max(d.longest, run);
      run = 0;
      ++gap;
    }
  }
  return d;
}

// Perfect detection with point tolerance w, checked sample by sample.
inline bool oracle_solved(const std::vector<bool>& flagged, const std::vector<OracleRegion>& truth, std::size_t w) {
  const std::size_t n = flagged.size();
  auto near = [&](std::size_t i, const OracleRegion& r) { return i + w >= r.start && i <= r.end + w; };
  for (std::size_t i = 0; i < n; ++i) {
    if (!flagged[i]) continue;
    bool ok = false;
    for (const auto& r : truth) ok = ok || near(i, r);
    if (!ok) return false;
  }
  for (const auto& r : truth) {
    bool hit = false;
    for (std::size_t i = 0; i < n && !hit; ++i) hit = flagged[i] && near(i, r);
    if (!hit) return false;
  }
  return true;
}

// Flags of "signal > t" on the diff coordinate (exceedance at i flags i+1).
inline std::vector<bool> oracle_threshold_flags(const std::vector<double>& signal, double t) {
  std::vector<bool> f(signal.size() + 1, false);
  for (std::size_t i = 0; i < signal.size(); ++i) f[i + 1] = signal[i] > t;
  return f;
}

// True when some threshold on `signal` solves the labels: only the distinct
// values (and -inf) can produce different flag sets.
inline bool oracle_threshold_exists(const std::vector<double>& signal, const std::vector<OracleRegion>& truth,
                                    std::size_t w) {
  std::vector<double> ts(signal.begin(), signal.end());
  ts.push_back(-std::numeric_limits<double>::infinity());
  for (double t : ts)
    if (oracle_solved(oracle_threshold_flags(signal, t), truth, w)) return true;
  return false;
}

inline std::vector<double> oracle_diff(const std::vector<double>& x, bool absolute) {
  std::vector<double> d;
  for (std::size_t i = 0; i + 1 < x.size(); ++i) d.push_back(absolute ? std::abs(x[i + 1] - x[i]) : x[i + 1] - x[i]);
  return d;
}

// The one-liner inequalities written out in their original form.
inline std::vector<bool> oracle_oneliner(const OneLinerSpec& s, const std::vector<double>& x) {
  std::vector<bool> f(x.size(), false);
  if (s.family == Family::ConstRun) {
    std::size_t i = 0;
    while (i < x.size()) {
      std::size_t j = i;
      while (j + 1 < x.size() && x[j + 1] == x[i]) ++j;
      if (j - i + 1 >= s.run_len)
        for (std::size_t t = i; t <= j; ++t) f[t] = true;
      i = j + 1;
    }
    return f;
  }
  const bool absolute = s.family == Family::GeneralAbs || s.family == Family::AbsDiffThresh || s.family == Family::AbsDiffMov;
  const auto d = oracle_diff(x, absolute);
  const bool thresh = s.family == Family::AbsDiffThresh || s.family == Family::DiffThresh;
  const auto mm = thresh ? std::vector<double>(d.size(), 0.0) : oracle_movmean(d, s.k);
  const auto ms = thresh ? std::vector<double>(d.size(), 0.0) : oracle_movstd(d, s.k);
  for (std::size_t i = 0; i < d.size(); ++i) {
    double rhs = s.b;
    if (!thresh) rhs = s.u * mm[i] + s.c * ms[i] + s.b;
    f[i + 1] = d[i] > rhs;
  }
  return f;
}

// ---------------------------------------------------------------------------
// Fixtures
// ---------------------------------------------------------------------------

// Noisy mixture of two sines; continuous noise means no two samples repeat.
inline std::vector<double> base_signal(std::size_t n, std::uint64_t seed, double noise = 0.05) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> z(0.0, 1.0);
  const double p1 = 40.0 + 40.0 * u(gen), p2 = 7.0 + 9.0 * u(gen), a2 = 0.2 + 0.3 * u(gen);
  const double ph = 2.0 * std::numbers::pi * u(gen);
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i);
    x[i] = std::sin(2.0 * std::numbers::pi * t / p1 + ph) + a2 * std::sin(2.0 * std::numbers::pi * t / p2) + noise * z(gen);
  }
  return x;
}

inline double sample_std(const std::vector<double>& x) {
  double mu = 0;
  for (double v : x) mu += v;
  mu /= static_cast<double>(x.size());
  double ss = 0;
  for (double v : x) ss += (v - mu) * (v - mu);
  return std::sqrt(ss / static_cast<double>(x.size() - 1));
}

struct Fixture {
  TimeSeries series;
  LabelSet labels;
};

enum class FixtureKind { Spike, Dropout, Freeze };

// One labelled anomaly in the test half of a noisy periodic series.
inline Fixture flaw_fixture(FixtureKind kind, std::size_t n, std::uint64_t seed) {
  auto x = base_signal(n, seed);
  std::mt19937_64 gen(seed ^ 0xF1A5ULL);
  const std::size_t len = kind == FixtureKind::Spike ? 1 : 20 + gen() % 40;
  const std::size_t train = n / 3;
  const std::size_t at = train + gen() % (n - train - len - 1);
  const double sd = sample_std(x);
  switch (kind) {
    case FixtureKind::Spike: x[at] += (gen() % 2 ? 1.0 : -1.0) * 8.0 * sd; break;
    case FixtureKind::Dropout: {
      const double lo = *std::min_element(x.begin(), x.end()) - 4.0 * sd;
      for (std::size_t i = at; i < at + len; ++i) x[i] = lo;
      break;
    }
    case FixtureKind::Freeze:
      for (std::size_t i = at + 1; i < at + len; ++i) x[i] = x[at];
      break;
  }
  const std::string name = std::string(kind == FixtureKind::Spike ? "spike" : kind == FixtureKind::Dropout ? "dropout" : "freeze") +
                           "_" + std::to_string(seed);
  return {TimeSeries(name, std::move(x), train), LabelSet({Region{at, at + len - 1}}, n)};
}

// A distinctive bump placed once (unique) or twice (twin) with only the first
// occurrence labelled. The twin is a sample-exact copy of the labelled context.
inline Fixture twin_fixture(bool twin, std::size_t n, std::size_t m, std::uint64_t seed) {
  auto x = base_signal(n, seed);
  std::mt19937_64 gen(seed ^ 0x7319ULL);
  const std::size_t len = 24;
  const std::size_t a = n / 5 + gen() % (n / 5);
  for (std::size_t i = 0; i < len; ++i) {
    const double t = (static_cast<double>(i) - len / 2.0) / 4.0;
    x[a + i] += 3.0 * std::exp(-t * t) - 1.5 * std::exp(-(t - 2) * (t - 2));
  }
  if (twin) {
    const std::size_t b = 3 * n / 5 + gen() % (n / 5);
    const std::size_t lo = a + len / 2 - m;
    for (std::size_t i = 0; i < 2 * m; ++i) x[b + i] = x[lo + i];
  }
  return {TimeSeries(std::string(twin ? "twin_" : "unique_") + std::to_string(seed), std::move(x)),
          LabelSet({Region{a, a + len - 1}}, n)};
}

// ---------------------------------------------------------------------------
// Files and processes
// ---------------------------------------------------------------------------

inline std::filesystem::path fresh_dir(const std::string& name) {
  const auto dir = std::filesystem::path(TSAUDIT_TMP) / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline void write_values(const std::filesystem::path& p, const std::vector<double>& x) {
  std::ofstream out(p, std::ios::binary);
  char buf[40];
  for (double v : x) {
    std::snprintf(buf, sizeof buf, "%.17g\n", v);
    out << buf;
  }
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct RunResult {
  int status = -1;
  std::string out;
};

// Runs the CLI with stdout (and stderr) captured.
inline RunResult run_cli(const std::string& args, const std::filesystem::path& dir, bool with_stderr = true) {
  const auto capture = dir / "cli_output.txt";
  const std::string cmd = std::string("\"") + TSAUDIT_CLI + "\" " + args + " > \"" + capture.string() + "\"" +
                          (with_stderr ? " 2>&1" : " 2>/dev/null");
  const int raw = std::system(cmd.c_str());
  RunResult r;
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  r.out = slurp(capture);
  return r;
}

}  // namespace tsaudit::testing
