#include <gtest/gtest.h>

#include <random>

#include "support.hpp"

using namespace tsaudit;
using namespace tsaudit::testing;

namespace {

std::vector<double> sine_with_spike(std::size_t n, std::size_t period, std::size_t spike_at, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> z(0.0, 0.02);
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = std::sin(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(period)) + z(gen);
  x[spike_at] += 2.5;
  return x;
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

}  // namespace

TEST(Znorm, SpecExamples) {
  const auto z = znorm(std::vector<double>{0, 2});
  EXPECT_NEAR(z[0], -std::sqrt(0.5), 1e-15);
  EXPECT_NEAR(z[1], std::sqrt(0.5), 1e-15);
  for (double v : znorm(std::vector<double>(6, 3.25))) EXPECT_EQ(v, 0.0);
  const auto once = znorm(std::vector<double>{1, 5, 2, 8, 3});
  const auto twice = znorm(once);
  for (std::size_t i = 0; i < once.size(); ++i) EXPECT_NEAR(once[i], twice[i], 1e-14);
}

TEST(DiscordScore, MatchesTripleLoopOracle) {
  std::mt19937_64 gen(17);
  for (int trial = 0; trial < 12; ++trial) {
    const std::size_t n = 64 + gen() % 500;
    const std::size_t m = 4 + gen() % 40;
    if (n < 2 * m) continue;
    auto x = base_signal(n, 100 + static_cast<std::uint64_t>(trial));
    if (trial % 3 == 0)
      for (std::size_t i = n / 4; i < n / 4 + m + 5 && i < n; ++i) x[i] = 0.5;  // flat windows
    if (trial % 4 == 1)
      for (std::size_t i = 0; i < n; ++i) x[i] = std::round(x[i] * 2.0);  // many exact ties
    DiscordParams p;
    p.sublen = m;
    const auto trace = discord_score(x, p, 3);
    const auto oracle = oracle_discord(x, m, p.exclusion_zone());
    ASSERT_EQ(trace.size(), oracle.size());
    EXPECT_LE(max_abs_diff(trace.scores(), oracle), 1e-9) << "n=" << n << " m=" << m;
  }
}

TEST(DiscordScore, SpikeIsTopDiscordAndTraceIsBounded) {
  const std::size_t n = 2000, period = 100, at = 1300, m = 60;
  const auto x = sine_with_spike(n, period, at, 5);
  DiscordParams p;
  p.sublen = m;
  const auto trace = discord_score(x, p, 4);
  EXPECT_EQ(trace.alignment(), Alignment::SubseqStart);
  const Index loc = trace.argmax_location();
  EXPECT_LE(loc > at ? loc - at : at - loc, m);
  for (double s : trace.scores()) {
    EXPECT_GE(s, 0.0);
    EXPECT_LE(s, 2.0 * std::sqrt(static_cast<double>(m)));
  }
}

TEST(DiscordScore, TwinAnomaliesSuppressEachOther) {
  const std::size_t n = 2000, period = 100, m = 60;
  auto single = sine_with_spike(n, period, 700, 8);
  auto twins = single;
  // Sample-exact copy of the spike's neighbourhood one period-aligned distance away.
  for (std::size_t i = 0; i < 2 * m; ++i) twins[1400 - m + i] = twins[700 - m + i];
  DiscordParams p;
  p.sublen = m;
  const auto ts = discord_score(single, p), tt = discord_score(twins, p);
  const double single_peak = ts.scores()[ts.argmax()];
  for (Index start : {700 - m / 2, 1400 - m / 2}) EXPECT_LT(tt.scores()[start], 0.2 * single_peak);
}

TEST(DiscordScore, AffineInvariance) {
  const auto x = base_signal(1500, 3);
  DiscordParams p;
  p.sublen = 50;
  const auto a = discord_score(x, p);
  for (auto [scale, shift] : {std::pair{3.0, 7.0}, std::pair{0.01, -2.0}, std::pair{250.0, 1e3}}) {
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = scale * x[i] + shift;
    EXPECT_LE(max_abs_diff(a.scores(), discord_score(y, p).scores()), 1e-6);
  }
}

TEST(DiscordScore, ReverseSymmetry) {
  const auto x = base_signal(900, 12);
  const std::vector<double> r(x.rbegin(), x.rend());
  DiscordParams p;
  p.sublen = 32;
  const auto a = discord_score(x, p), b = discord_score(r, p);
  const Index n = x.size(), m = p.sublen;
  for (Index i = 0; i < a.size(); ++i) EXPECT_NEAR(a.scores()[i], b.scores()[n - m - i], 1e-9);
}

TEST(DiscordScore, BitIdenticalAcrossJobs) {
  const auto x = base_signal(3000, 21);
  DiscordParams p;
  p.sublen = 64;
  const auto a = discord_score(x, p, 1);
  for (unsigned jobs : {2u, 3u, 8u, 0u}) {
    const auto b = discord_score(x, p, jobs);
    ASSERT_TRUE(std::equal(a.scores().begin(), a.scores().end(), b.scores().begin()));
  }
}

TEST(DiscordScore, ParameterValidation) {
  const auto x = base_signal(100, 1);
  DiscordParams p;
  p.sublen = 51;
  EXPECT_THROW(discord_score(x, p), PreconditionError);
  p.sublen = 3;
  EXPECT_THROW(discord_score(x, p), PreconditionError);
  p.sublen = 20;
  p.exclusion = 0;
  EXPECT_THROW(discord_score(x, p), PreconditionError);
  p.exclusion = 41;
  EXPECT_THROW(discord_score(x, p), PreconditionError);
  p.exclusion = 40;
  EXPECT_NO_THROW(discord_score(x, p));
}

TEST(TopKDiscords, SpecExamples) {
  const auto t = ScoreTrace::pointwise({0, 0, 9, 0, 0, 7, 0});
  EXPECT_EQ(top_k_discords(t, 2, 2), (std::vector<Index>{2, 5}));
  const auto mono = ScoreTrace::pointwise({1, 2, 3, 4, 5});
  EXPECT_EQ(top_k_discords(mono, 1, 1), (std::vector<Index>{4}));
  const auto flat = ScoreTrace::pointwise(std::vector<double>(7, 1.0));
  EXPECT_EQ(top_k_discords(flat, 3, 2), (std::vector<Index>{0, 2, 4}));
}
