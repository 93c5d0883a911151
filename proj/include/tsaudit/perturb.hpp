#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <variant>
#include <vector>

#include "tsaudit/core.hpp"
#include "tsaudit/discord.hpp"
#include "tsaudit/oneliner.hpp"
#include "tsaudit/rng.hpp"
#include "tsaudit/scoring.hpp"

namespace tsaudit {

// ---------------------------------------------------------------------------
// Perturbations
// ---------------------------------------------------------------------------

struct GaussianNoise { double sigma = 0.0; };
struct AmplitudeScale { double a = 1.0; };
struct Offset { double b0 = 0.0; };
struct LinearTrend { double slope = 0.0; };  // per sample
struct WanderingBaseline { double step_sigma = 0.0; };  // random-walk drift
struct UniformScaling { double factor = 1.0; };  // time axis, linear interpolation
struct Dropout { Region region; double value = 0.0; };
struct ConstantFreeze { Region region; };

using Perturbation = std::variant<GaussianNoise, AmplitudeScale, Offset, LinearTrend,
                                  WanderingBaseline, UniformScaling, Dropout, ConstantFreeze>;

/// Resampled length for a time-axis scaling factor.
inline Index scaled_length(Index n, double factor) {
  return static_cast<Index>(std::llround(static_cast<double>(n) * factor));
}

/// Maps index i of a length-n series onto the resampled length-N axis.
inline Index scaled_index(Index i, Index n, Index scaled_n) {
  return static_cast<Index>(std::llround(static_cast<double>(i) * static_cast<double>(scaled_n - 1) /
                                         static_cast<double>(n - 1)));
}

inline TimeSeries apply_perturbation(const TimeSeries& ts, const Perturbation& p, std::uint64_t seed) {
  std::vector<double> v(ts.values().begin(), ts.values().end());
  const Index n = v.size();
  CounterRng rng(seed, 0x9E27);

  std::visit(
      [&](const auto& q) {
        using T = std::decay_t<decltype(q)>;
        if constexpr (std::is_same_v<T, GaussianNoise>) {
          require(std::isfinite(q.sigma) && q.sigma >= 0.0, "gaussian-noise: sigma must be >= 0");
          for (double& x : v) x += q.sigma * rng.normal();
        } else if constexpr (std::is_same_v<T, AmplitudeScale>) {
          require(std::isfinite(q.a) && q.a > 0.0, "amplitude-scale: factor must be > 0");
          for (double& x : v) x *= q.a;
        } else if constexpr (std::is_same_v<T, Offset>) {
          require(std::isfinite(q.b0), "offset: value must be finite");
          for (double& x : v) x += q.b0;
        } else if constexpr (std::is_same_v<T, LinearTrend>) {
          require(std::isfinite(q.slope), "linear-trend: slope must be finite");
          for (Index i = 0; i < n; ++i) v[i] += q.slope * static_cast<double>(i);
        } else if constexpr (std::is_same_v<T, WanderingBaseline>) {
          require(std::isfinite(q.step_sigma) && q.step_sigma >= 0.0,
                  "wandering-baseline: step sigma must be >= 0");
          double drift = 0.0;
          for (double& x : v) {
            drift += q.step_sigma * rng.normal();
            x += drift;
          }
        } else if constexpr (std::is_same_v<T, UniformScaling>) {
          require(std::isfinite(q.factor) && q.factor > 0.0, "uniform-scaling: factor must be > 0");
          const Index out_n = scaled_length(n, q.factor);
          require(out_n >= 2, "uniform-scaling: scaled series would have fewer than 2 samples");
          std::vector<double> out(out_n);
          for (Index i = 0; i < out_n; ++i) {
            const double pos = static_cast<double>(i) * static_cast<double>(n - 1) / static_cast<double>(out_n - 1);
            const auto lo = std::min<Index>(static_cast<Index>(pos), n - 1);
            const Index hi = std::min(lo + 1, n - 1);
            const double frac = pos - static_cast<double>(lo);
            out[i] = frac == 0.0 ? v[lo] : v[lo] + frac * (v[hi] - v[lo]);
          }
          v = std::move(out);
        } else if constexpr (std::is_same_v<T, Dropout>) {
          require(q.region.start <= q.region.end && q.region.end < n, "dropout: region outside series");
          require(std::isfinite(q.value), "dropout: value must be finite");
          for (Index i = q.region.start; i <= q.region.end; ++i) v[i] = q.value;
        } else if constexpr (std::is_same_v<T, ConstantFreeze>) {
          require(q.region.start <= q.region.end && q.region.end < n, "freeze: region outside series");
          for (Index i = q.region.start; i <= q.region.end; ++i) v[i] = v[q.region.start];
        }
      },
      p);
  return ts.with_values(std::move(v));
}

inline std::string describe(const Perturbation& p) {
  return std::visit(
      [](const auto& q) -> std::string {
        using T = std::decay_t<decltype(q)>;
        const auto num = format_number;
        if constexpr (std::is_same_v<T, GaussianNoise>) return "gaussian-noise:sigma=" + num(q.sigma);
        if constexpr (std::is_same_v<T, AmplitudeScale>) return "amplitude-scale:a=" + num(q.a);
        if constexpr (std::is_same_v<T, Offset>) return "offset:b0=" + num(q.b0);
        if constexpr (std::is_same_v<T, LinearTrend>) return "linear-trend:slope=" + num(q.slope);
        if constexpr (std::is_same_v<T, WanderingBaseline>) return "wandering-baseline:step_sigma=" + num(q.step_sigma);
        if constexpr (std::is_same_v<T, UniformScaling>) return "uniform-scaling:factor=" + num(q.factor);
        if constexpr (std::is_same_v<T, Dropout>)
          return "dropout:region=" + std::to_string(q.region.start) + "-" + std::to_string(q.region.end) +
                 ":value=" + num(q.value);
        if constexpr (std::is_same_v<T, ConstantFreeze>)
          return "freeze:region=" + std::to_string(q.region.start) + "-" + std::to_string(q.region.end);
        return "?";
      },
      p);
}

namespace detail {

inline double parse_real(std::string_view s, std::string_view what) {
  std::string tmp(s);
  char* end = nullptr;
  const double v = std::strtod(tmp.c_str(), &end);
  if (tmp.empty() || end != tmp.c_str() + tmp.size() || !std::isfinite(v))
    throw ParseError("perturbation " + std::string(what) + ": '" + tmp + "' is not a finite number");
  return v;
}

inline Region parse_region(std::string_view s, std::string_view what) {
  const auto dash = s.find('-');
  const auto a = parse_index(s.substr(0, dash));
  const auto b = dash == std::string_view::npos ? a : parse_index(s.substr(dash + 1));
  if (!a || !b || *a > *b)
    throw ParseError("perturbation " + std::string(what) + ": '" + std::string(s) +
                     "' is not a region START-END");
  return Region{*a, *b};
}

}  // namespace detail

/// Parses "kind[:arg[:arg]]"; each arg is positional or "key=value".
/// Kinds: gaussian-noise:sigma, amplitude-scale:a, offset:b0, linear-trend:slope,
/// wandering-baseline:step_sigma, uniform-scaling:factor, dropout:START-END:value,
/// freeze:START-END.
inline Perturbation parse_perturbation(std::string_view text) {
  std::vector<std::string_view> parts;
  for (std::string_view rest = text;;) {
    const auto colon = rest.find(':');
    parts.push_back(rest.substr(0, colon));
    if (colon == std::string_view::npos) break;
    rest.remove_prefix(colon + 1);
  }
  const std::string_view kind = parts[0];
  std::vector<std::string_view> args;
  for (Index i = 1; i < parts.size(); ++i) {
    auto a = parts[i];
    if (const auto eq = a.find('='); eq != std::string_view::npos) a.remove_prefix(eq + 1);
    args.push_back(a);
  }
  auto arg = [&](Index i, std::string_view name) -> std::string_view {
    if (i >= args.size())
      throw ParseError("perturbation '" + std::string(text) + "' is missing " + std::string(name));
    return args[i];
  };
  auto expect_args = [&](Index count) {
    if (args.size() > count)
      throw ParseError("perturbation '" + std::string(text) + "' has too many arguments");
  };

  if (kind == "gaussian-noise") { expect_args(1); return GaussianNoise{detail::parse_real(arg(0, "sigma"), kind)}; }
  if (kind == "amplitude-scale") { expect_args(1); return AmplitudeScale{detail::parse_real(arg(0, "a"), kind)}; }
  if (kind == "offset") { expect_args(1); return Offset{detail::parse_real(arg(0, "b0"), kind)}; }
  if (kind == "linear-trend") { expect_args(1); return LinearTrend{detail::parse_real(arg(0, "slope"), kind)}; }
  if (kind == "wandering-baseline") {
    expect_args(1);
    return WanderingBaseline{detail::parse_real(arg(0, "step_sigma"), kind)};
  }
  if (kind == "uniform-scaling") { expect_args(1); return UniformScaling{detail::parse_real(arg(0, "factor"), kind)}; }
  if (kind == "dropout") {
    expect_args(2);
    return Dropout{detail::parse_region(arg(0, "region"), kind), detail::parse_real(arg(1, "value"), kind)};
  }
  if (kind == "freeze") { expect_args(1); return ConstantFreeze{detail::parse_region(arg(0, "region"), kind)}; }
  throw ParseError("unknown perturbation kind '" + std::string(kind) + "'");
}

// ---------------------------------------------------------------------------
// Period estimation and injection
// ---------------------------------------------------------------------------

/// Dominant cycle length: the lag in [4, n/4] with the highest autocorrelation,
/// searched only beyond the first local minimum of the autocorrelation so the
/// trivially high short lags of a smooth signal do not win.
inline Index estimate_period(std::span<const double> x) {
  const Index n = x.size();
  const Index max_lag = n / 4;
  require(max_lag >= 4, "estimate_period: need at least 16 samples");
  const Moments mo = moments(x);
  require(mo.ss > 0.0, "estimate_period: constant signal has no period");

  std::vector<double> acf(max_lag + 2, 0.0);
  for (Index lag = 1; lag <= max_lag + 1 && lag < n; ++lag) {
    double s = 0.0;
    for (Index t = 0; t + lag < n; ++t) s += (x[t] - mo.mean) * (x[t + lag] - mo.mean);
    acf[lag] = s / mo.ss * static_cast<double>(n) / static_cast<double>(n - lag);
  }
  Index start = 4;
  for (Index lag = 2; lag <= max_lag; ++lag) {
    if (acf[lag] <= acf[lag - 1] && acf[lag] <= acf[lag + 1]) {
      start = std::max<Index>(4, lag);
      break;
    }
  }
  Index best = start;
  for (Index lag = start; lag <= max_lag; ++lag)
    if (acf[lag] > acf[best]) best = lag;
  return best;
}

enum class InjectionKind { Spike, Dropout, Freeze, CycleSplice };

inline std::string_view injection_name(InjectionKind k) {
  switch (k) {
    case InjectionKind::Spike: return "spike";
    case InjectionKind::Dropout: return "dropout";
    case InjectionKind::Freeze: return "freeze";
    case InjectionKind::CycleSplice: return "cycle-splice";
  }
  return "?";
}

inline std::optional<InjectionKind> parse_injection_kind(std::string_view s) {
  for (auto k : {InjectionKind::Spike, InjectionKind::Dropout, InjectionKind::Freeze, InjectionKind::CycleSplice})
    if (injection_name(k) == s) return k;
  return std::nullopt;
}

struct InjectionSpec {
  InjectionKind kind = InjectionKind::Spike;
  std::optional<Index> location;      // nullopt: seeded random, inside the test part
  double magnitude = 10.0;            // spike height / dropout depth, in units of the series std
  Index length = 50;                  // dropout and freeze length
  std::optional<double> value;        // explicit dropout level
  std::optional<Index> donor_start;   // cycle splice donor; random in the training part if absent
  std::optional<Index> period;        // cycle length; estimated if absent
  std::uint64_t seed = 0;
};

struct Injection {
  TimeSeries series;
  Region region;
};

/// Inserts one anomaly and returns the modified series with its exact
/// ground-truth region. Random placement avoids the training prefix.
inline Injection inject_anomaly(const TimeSeries& clean, const InjectionSpec& spec) {
  const Index n = clean.size();
  const auto x = clean.values();
  std::vector<double> v(x.begin(), x.end());
  CounterRng rng(spec.seed, 0x1A7E);
  const Index test_begin = clean.train_end().value_or(0);
  const double scale = [&] {
    const double s = moments(x).std;
    return s > 0.0 ? s : 1.0;
  }();

  auto place = [&](Index len) -> Index {
    require(len >= 1 && len <= n, "inject: anomaly length does not fit the series");
    if (spec.location) {
      require(*spec.location + len <= n, "inject: anomaly at " + std::to_string(*spec.location) +
                                             " runs past the end of the series");
      return *spec.location;
    }
    require(test_begin + len <= n, "inject: test part too short for the anomaly");
    return static_cast<Index>(rng.uniform_int(test_begin, n - len));
  };

  switch (spec.kind) {
    case InjectionKind::Spike: {
      require(std::isfinite(spec.magnitude), "inject: magnitude must be finite");
      const Index at = place(1);
      v[at] += spec.magnitude * scale;
      return {clean.with_values(std::move(v)), Region{at, at}};
    }
    case InjectionKind::Dropout: {
      const Index at = place(spec.length);
      const double level = spec.value.value_or(*std::min_element(x.begin(), x.end()) - spec.magnitude * scale);
      require(std::isfinite(level), "inject: dropout level must be finite");
      for (Index i = at; i < at + spec.length; ++i) v[i] = level;
      return {clean.with_values(std::move(v)), Region{at, at + spec.length - 1}};
    }
    case InjectionKind::Freeze: {
      require(spec.length >= 2, "inject: freeze length must be >= 2");
      const Index at = place(spec.length);
      for (Index i = at; i < at + spec.length; ++i) v[i] = x[at];
      return {clean.with_values(std::move(v)), Region{at, at + spec.length - 1}};
    }
    case InjectionKind::CycleSplice: {
      const Index period = spec.period ? *spec.period : estimate_period(clean.train());
      require(period >= 2, "inject: cycle length must be >= 2");
      require(period <= n / 4, "inject: cycle length " + std::to_string(period) + " exceeds n/4");
      Index donor = 0;
      if (spec.donor_start) {
        donor = *spec.donor_start;
      } else {
        const Index donor_end = std::max(test_begin, period);
        donor = static_cast<Index>(rng.uniform_int(0, std::min(donor_end, n) - period));
      }
      require(donor + period <= n, "inject: donor cycle runs past the end of the series");
      const Region donor_region{donor, donor + period - 1};

      Index at = 0;
      if (spec.location) {
        at = place(period);
      } else {
        bool ok = false;
        for (int attempt = 0; attempt < 1000 && !ok; ++attempt) {
          at = place(period);
          ok = !Region{at, at + period - 1}.intersects(donor_region);
        }
        require(ok, "inject: no target position clear of the donor cycle");
      }
      const Region target{at, at + period - 1};
      if (target.intersects(donor_region))
        throw PreconditionError("inject: donor and target cycles overlap");
      // Additive offset: the donor's first sample lands on the value it replaces.
      const double shift = x[at] - x[donor];
      for (Index i = 0; i < period; ++i) v[at + i] = x[donor + i] + shift;
      return {clean.with_values(std::move(v)), target};
    }
  }
  throw PreconditionError("inject: unknown anomaly kind");
}

// ---------------------------------------------------------------------------
// Invariance probes
// ---------------------------------------------------------------------------

using TraceDetector = std::function<ScoreTrace(const TimeSeries&)>;

struct ProbeEntry {
  std::string perturbation;
  std::optional<Index> argmax_before;
  std::optional<Index> argmax_after;
  bool hit_before = false;
  bool hit_after = false;
  std::optional<std::string> error;
};

struct ProbeReport {
  Region truth;
  Index slop = 0;
  std::vector<ProbeEntry> entries;
};

/// Truth region carried through a perturbation (only time scaling moves it).
inline Region map_truth(const Region& truth, const Perturbation& p, Index n) {
  if (const auto* us = std::get_if<UniformScaling>(&p)) {
    const Index out_n = scaled_length(n, us->factor);
    return Region{scaled_index(truth.start, n, out_n), scaled_index(truth.end, n, out_n)};
  }
  return truth;
}

/// Compares the detector's predicted location before and after each
/// perturbation. Verdicts come from argmax-in-window only, never from score
/// values. Detector or perturbation failures are recorded per entry.
inline ProbeReport invariance_probe(const TraceDetector& detector, const TimeSeries& ts, const Region& truth,
                                    std::span<const Perturbation> perturbations, Index slop,
                                    std::uint64_t seed, unsigned jobs = 1) {
  require(truth.start <= truth.end && truth.end < ts.size(), "probe: truth region outside series");
  ProbeReport report{truth, slop, {}};
  report.entries.resize(perturbations.size());

  std::optional<Index> before;
  std::optional<std::string> before_error;
  try {
    before = detector(ts).argmax_location();
  } catch (const std::exception& e) {
    before_error = std::string("detector failed on the original series: ") + e.what();
  }

  parallel_for(perturbations.size(), jobs, [&](Index i) {
    auto& e = report.entries[i];
    e.perturbation = describe(perturbations[i]);
    e.argmax_before = before;
    e.hit_before = before && location_hit(*before, truth, slop);
    if (before_error) {
      e.error = before_error;
      return;
    }
    try {
      const auto perturbed = apply_perturbation(ts, perturbations[i], CounterRng(seed, i).at(0));
      const Region moved = map_truth(truth, perturbations[i], ts.size());
      e.argmax_after = detector(perturbed).argmax_location();
      e.hit_after = location_hit(*e.argmax_after, moved, slop);
    } catch (const std::exception& ex) {
      e.error = ex.what();
    }
  });
  return report;
}

}  // namespace tsaudit
