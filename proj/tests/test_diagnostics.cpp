#include <gtest/gtest.h>

#include <random>

#include "support.hpp"

using namespace tsaudit;
using namespace tsaudit::testing;

TEST(DensityMetrics, SpecExamples) {
  const auto a = density_metrics(LabelSet({{3, 3}}, 10));
  EXPECT_DOUBLE_EQ(a.anomaly_fraction, 0.1);
  EXPECT_EQ(a.region_count, 1u);
  EXPECT_DOUBLE_EQ(a.max_region_fraction, 0.1);
  EXPECT_EQ(a.min_inter_region_gap, std::nullopt);

  const auto b = density_metrics(regions_from_flags({false, true, true, false, false, true}));
  EXPECT_DOUBLE_EQ(b.anomaly_fraction, 0.5);
  EXPECT_EQ(b.region_count, 2u);
  EXPECT_EQ(b.min_inter_region_gap, 2u);

  const auto c = density_metrics(LabelSet({{0, 9}}, 10));
  EXPECT_DOUBLE_EQ(c.anomaly_fraction, 1.0);
  EXPECT_DOUBLE_EQ(c.max_region_fraction, 1.0);
}

TEST(DensityMetrics, MatchesScanOracle) {
  std::mt19937_64 gen(44);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + gen() % 200;
    const double p = std::uniform_real_distribution<double>(0.0, 0.6)(gen);
    std::vector<bool> flags(n);
    for (std::size_t i = 0; i < n; ++i) flags[i] = std::bernoulli_distribution(p)(gen);
    const auto d = density_metrics(regions_from_flags(flags));
    const auto o = oracle_density(flags);
    EXPECT_EQ(d.labeled_samples, o.labeled);
    EXPECT_EQ(d.region_count, o.regions);
    EXPECT_EQ(d.min_inter_region_gap, o.min_gap);
    EXPECT_EQ(d.max_region_fraction, static_cast<double>(o.longest) / static_cast<double>(n));
    EXPECT_EQ(d.anomaly_fraction, static_cast<double>(o.labeled) / static_cast<double>(n));
  }
}

TEST(DensityFlags, Thresholds) {
  auto has = [](const std::vector<Flag>& fs, Flag f) { return std::find(fs.begin(), fs.end(), f) != fs.end(); };
  EXPECT_TRUE(has(density_flags(density_metrics(LabelSet({{0, 33}}, 100))), Flag::HighDensity));
  EXPECT_FALSE(has(density_flags(density_metrics(LabelSet({{0, 32}}, 100))), Flag::HighDensity));
  const auto sandwich = density_flags(density_metrics(LabelSet({{10, 12}, {15, 20}}, 100)));
  EXPECT_TRUE(has(sandwich, Flag::MultipleAnomalies));
  EXPECT_TRUE(has(sandwich, Flag::Sandwich));
  EXPECT_FALSE(has(density_flags(density_metrics(LabelSet({{10, 12}, {16, 20}}, 100))), Flag::Sandwich));
}

TEST(PositionBias, SpecExamples) {
  std::vector<LabelSet> terminal;
  for (Index n : {50, 80, 200}) terminal.emplace_back(std::vector<Region>{{n - 5, n - 1}}, n);
  const auto a = position_bias(terminal, 0);
  EXPECT_DOUBLE_EQ(a.mean_position, 1.0);
  EXPECT_DOUBLE_EQ(a.last_point_hit_rate, 1.0);
  EXPECT_TRUE(run_to_failure_suspected(a));

  const std::vector<LabelSet> first{LabelSet({{0, 0}}, 101)};
  EXPECT_DOUBLE_EQ(position_bias(first, 0).mean_position, 0.0);

  std::mt19937_64 gen(1000);
  std::vector<LabelSet> uniform;
  for (int i = 0; i < 1000; ++i) {
    const Index n = 500 + gen() % 500;
    const Index at = gen() % n;
    uniform.emplace_back(std::vector<Region>{{at, at}}, n);
  }
  const auto u = position_bias(uniform, 10);
  EXPECT_NEAR(u.mean_position, 0.5, 0.05);
  EXPECT_FALSE(run_to_failure_suspected(u));
}

TEST(PositionBias, AppendingNormalSuffixLowersEveryPosition) {
  std::mt19937_64 gen(7);
  for (int trial = 0; trial < 300; ++trial) {
    const Index n = 2 + gen() % 300;
    const Index a = gen() % n;
    const Index b = a + gen() % (n - a);
    const LabelSet ls({{a, b}}, n);
    const LabelSet longer({{a, b}}, n + 1 + gen() % 50);
    const double p0 = position_bias(std::span<const LabelSet>(&ls, 1), 0).relative_positions[0];
    const double p1 = position_bias(std::span<const LabelSet>(&longer, 1), 0).relative_positions[0];
    EXPECT_GE(p0, 0.0);
    EXPECT_LE(p0, 1.0);
    if (p0 > 0.0)
      EXPECT_LT(p1, p0);
    else
      EXPECT_EQ(p1, 0.0);
  }
}

TEST(SubsequenceFeatures, SpecExamples) {
  const std::vector<double> flat(8, 4.0);
  const auto c = subsequence_features(flat, {0, 7});
  EXPECT_EQ(c.variance, 0.0);
  EXPECT_EQ(c.complexity, 0.0);
  EXPECT_EQ(c.lag1_autocorr, 0.0);

  const std::vector<double> alt{0, 1, 0, 1};
  EXPECT_DOUBLE_EQ(subsequence_features(alt, {0, 3}).complexity, std::sqrt(3.0));
  const std::vector<double> ramp{0, 1, 2, 3};
  const auto r = subsequence_features(ramp, {0, 3});
  EXPECT_DOUBLE_EQ(r.complexity, std::sqrt(3.0));
  EXPECT_EQ(r.max, 3.0);
  EXPECT_EQ(r.min, 0.0);
  EXPECT_DOUBLE_EQ(r.mean, 1.5);
  EXPECT_DOUBLE_EQ(r.variance, 5.0 / 3.0);
  // lag-1 autocorrelation of the ramp: sum (x_t - 1.5)(x_{t+1} - 1.5) / sum (x_t - 1.5)^2 = 1.25 / 5
  EXPECT_DOUBLE_EQ(r.lag1_autocorr, 1.25 / 5.0);
}

TEST(SubsequenceFeatures, ComplexityOffsetAndReversalInvariant) {
  std::mt19937_64 gen(2);
  std::normal_distribution<double> z(0, 1);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> x(2 + gen() % 60);
    for (auto& v : x) v = z(gen);
    const Region all{0, x.size() - 1};
    const double base = subsequence_features(x, all).complexity;
    std::vector<double> shifted(x), reversed(x.rbegin(), x.rend());
    for (auto& v : shifted) v += 123.0;
    EXPECT_NEAR(subsequence_features(shifted, all).complexity, base, 1e-9);
    EXPECT_NEAR(subsequence_features(reversed, all).complexity, base, 1e-12);
  }
}

namespace {

// All-pairs distances from the labelled query window to every admissible
// candidate window, computed from scratch.
std::vector<std::pair<double, Index>> oracle_profile(const TimeSeries& ts, const LabelSet& labels, Index m) {
  const std::vector<double> x(ts.values().begin(), ts.values().end());
  const Index n = x.size();
  const auto& r = labels.regions()[0];
  const Index centre = r.start + (r.end - r.start) / 2;
  const Index q = std::min(centre >= m / 2 ? centre - m / 2 : 0, n - m);
  const auto zq = oracle_znorm(x, q, m);
  std::vector<std::pair<double, Index>> out;
  for (Index j = 0; j + m <= n; ++j) {
    bool blocked = false;
    for (const auto& reg : labels.regions()) {
      const auto d = dilate_region(reg, m / 2, n);
      blocked = blocked || (j <= d.end && d.start <= j + m - 1);
    }
    if (blocked) continue;
    const auto zj = oracle_znorm(x, j, m);
    long double s = 0;
    for (Index t = 0; t < m; ++t) s += (zq[t] - zj[t]) * (zq[t] - zj[t]);
    out.emplace_back(static_cast<double>(std::sqrt(s)), j);
  }
  return out;
}

}  // namespace

TEST(LabelConsistency, ExactUnlabelledCopyIsTheOnlyFalseNegativeCandidate) {
  const Index n = 2000, m = 64;
  auto x = base_signal(n, 31);
  x[600] += 3.0;
  const Index copy_offset = 800;
  for (Index i = 600 - m; i < 600 + m; ++i) x[i + copy_offset] = x[i];
  const TimeSeries ts("copy", x);
  const LabelSet labels({{600, 600}}, n);
  const auto scan = label_consistency_scan(ts, labels, {m, 0.5, 256, 1});

  std::vector<ConsistencyFinding> fn;
  for (const auto& f : scan.findings)
    if (f.kind == FindingKind::FnCandidate) fn.push_back(f);
  ASSERT_EQ(fn.size(), 1u);
  const auto oracle = oracle_profile(ts, labels, m);
  const auto best = *std::min_element(oracle.begin(), oracle.end());
  EXPECT_EQ(fn[0].location.start, best.second);
  EXPECT_EQ(fn[0].location.start, fn[0].reference.start + copy_offset);
  EXPECT_NEAR(fn[0].distance, 0.0, 1e-6);
  EXPECT_NEAR(fn[0].distance, best.first, 1e-9);
  for (const auto& f : scan.findings)
    if (f.kind == FindingKind::FnCandidate) {
      EXPECT_FALSE(f.location.intersects(labels.regions()[0]));
    }
}

TEST(LabelConsistency, GloballyUniqueAnomalyHasNoFindings) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto f = twin_fixture(false, 2000, 64, seed);
    const auto scan = label_consistency_scan(f.series, f.labels, {64, 0.5, 256, seed});
    EXPECT_TRUE(scan.findings.empty()) << seed;
    // Every admissible window is farther than the threshold (oracle).
    for (const auto& [d, j] : oracle_profile(f.series, f.labels, 64)) EXPECT_GT(d, scan.threshold);
  }
}

TEST(LabelConsistency, LabelInsideLongConstantStretchIsFalsePositiveCandidate) {
  const Index n = 1200, m = 32;
  auto x = base_signal(n, 9);
  for (Index i = 400; i < 700; ++i) x[i] = 0.25;
  const TimeSeries ts("flatline", x);
  const LabelSet labels({{540, 560}}, n);
  const auto scan = label_consistency_scan(ts, labels, {m, 0.5, 256, 3});
  Index fp = 0;
  for (const auto& f : scan.findings)
    if (f.kind == FindingKind::FpCandidate) {
      ++fp;
      EXPECT_EQ(f.location, labels.regions()[0]);
      EXPECT_EQ(f.distance, 0.0);
    }
  EXPECT_EQ(fp, 1u);
}

TEST(LabelConsistency, DeterministicGivenSeedAndJobs) {
  const auto f = twin_fixture(true, 2000, 64, 4);
  const auto a = label_consistency_scan(f.series, f.labels, {64, 0.5, 256, 77}, 1);
  const auto b = label_consistency_scan(f.series, f.labels, {64, 0.5, 256, 77}, 6);
  EXPECT_EQ(a.median_nn_distance, b.median_nn_distance);
  ASSERT_EQ(a.findings.size(), b.findings.size());
  for (std::size_t i = 0; i < a.findings.size(); ++i) {
    EXPECT_EQ(a.findings[i].location, b.findings[i].location);
    EXPECT_EQ(a.findings[i].distance, b.findings[i].distance);
  }
}

TEST(Flags, NamesRoundTrip) {
  for (Flag f : kAllFlags) EXPECT_EQ(parse_flag(flag_name(f)), f);
  EXPECT_EQ(flag_name(Flag::HighDensity), "HIGH_DENSITY");
}
