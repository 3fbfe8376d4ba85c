#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "leray/error.hpp"
#include "leray/statistics.hpp"

using namespace leray;
using namespace leray::experiments;

TEST(FitLine, ExactPowerLaw) {
  std::vector<double> x, y;
  for (int n : {4, 8, 16, 32}) {
    x.push_back(std::log(n));
    y.push_back(std::log(3.0 * std::pow(n, -0.45)));
  }
  auto f = fit_line(x, y);
  EXPECT_NEAR(f.slope, -0.45, 1e-14);
  EXPECT_NEAR(f.intercept, std::log(3.0), 1e-13);
  EXPECT_LT(f.stderr_slope, 1e-13);
  EXPECT_EQ(f.points, 4u);
}

TEST(FitLine, NoisyWithinStandardErrors) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> noise(0.0, 0.05);
  std::vector<double> x, y;
  for (int i = 0; i < 40; ++i) {
    x.push_back(0.1 * i);
    y.push_back(1.0 - 0.7 * 0.1 * i + noise(rng));
  }
  auto f = fit_line(x, y);
  EXPECT_GT(f.stderr_slope, 0.0);
  EXPECT_LT(std::abs(f.slope + 0.7), 3.0 * f.stderr_slope);
}

TEST(FitLine, RejectsDegenerateInput) {
  std::vector<double> two{1.0, 2.0};
  EXPECT_THROW(fit_line(two, two), ValidationError);
  std::vector<double> same{1.0, 1.0, 1.0}, y{1.0, 2.0, 3.0};
  EXPECT_THROW(fit_line(same, y), ValidationError);
}

TEST(MomentRoot, Values) {
  std::vector<double> v{1.0, -2.0, 2.0};
  EXPECT_NEAR(moment_root(v, 2.0), std::sqrt(3.0), 1e-15);
  EXPECT_NEAR(moment_root(v, 1.0), 5.0 / 3.0, 1e-15);
  EXPECT_THROW(moment_root(std::vector<double>{}, 2.0), ValidationError);
}

TEST(Bootstrap, ConstantSampleHasZeroWidth) {
  std::vector<double> v(20, 0.7);
  auto ci = bootstrap_ci(v, 3.0, 0.95, 1, 200);
  EXPECT_NEAR(ci.low, 0.7, 1e-15);
  EXPECT_NEAR(ci.high, 0.7, 1e-15);
}

TEST(Bootstrap, NestedLevelsAndDeterminism) {
  std::mt19937_64 rng(9);
  std::exponential_distribution<double> e(1.0);
  std::vector<double> v(60);
  for (auto& x : v) x = e(rng);
  auto narrow = bootstrap_ci(v, 2.0, 0.8, 4, 1000);
  auto wide = bootstrap_ci(v, 2.0, 0.95, 4, 1000);
  EXPECT_LE(wide.low, narrow.low);
  EXPECT_GE(wide.high, narrow.high);
  auto again = bootstrap_ci(v, 2.0, 0.95, 4, 1000);
  EXPECT_EQ(wide.low, again.low);
  EXPECT_EQ(wide.high, again.high);
  EXPECT_THROW(bootstrap_ci(std::vector<double>(5, 1.0), 2.0, 0.9, 1), ValidationError);
  EXPECT_THROW(bootstrap_ci(v, 0.5, 0.9, 1), ValidationError);
}

TEST(Bootstrap, CoverageCalibration) {
  // Standard normal: (E|X|^2)^{1/2} = 1.
  std::mt19937_64 rng(2718);
  std::normal_distribution<double> g;
  int covered = 0;
  const int trials = 100;
  for (int t = 0; t < trials; ++t) {
    std::vector<double> v(80);
    for (auto& x : v) x = g(rng);
    auto ci = bootstrap_ci(v, 2.0, 0.9, 1000 + t, 500);
    covered += (ci.low <= 1.0 && 1.0 <= ci.high) ? 1 : 0;
  }
  EXPECT_GE(covered, 78);
  EXPECT_LE(covered, 98);
}

TEST(SupMomentRoot, TakesWorstTime) {
  // 2 samples x 3 times
  std::vector<double> m{1.0, 3.0, 0.0, 1.0, -1.0, 0.0};
  EXPECT_NEAR(sup_moment_root(m, 2, 3, 2.0), std::sqrt(5.0), 1e-15);
  EXPECT_THROW(sup_moment_root(m, 2, 2, 2.0), ValidationError);
  std::vector<double> rows(30, 0.0);
  for (int s = 0; s < 10; ++s) rows[s * 3 + 1] = 2.0;
  auto ci = bootstrap_sup_ci(rows, 10, 3, 2.0, 0.9, 3, 100);
  EXPECT_NEAR(ci.low, 2.0, 1e-15);
  EXPECT_NEAR(ci.high, 2.0, 1e-15);
}

TEST(JarqueBera, HandComputedStatistic) {
  // Nine zeros and a one: skewness 8/3, excess kurtosis 46/9.
  std::vector<double> v(10, 0.0);
  v[9] = 1.0;
  auto r = jarque_bera(v);
  EXPECT_NEAR(r.skewness, 8.0 / 3.0, 1e-13);
  EXPECT_NEAR(r.excess_kurtosis, 46.0 / 9.0, 1e-13);
  EXPECT_NEAR(r.statistic, 11050.0 / 486.0, 1e-12);
  EXPECT_NEAR(r.p_value, std::exp(-0.5 * 11050.0 / 486.0), 1e-18);
}

TEST(JarqueBera, SeparatesNormalFromSkewed) {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> g;
  std::exponential_distribution<double> e(1.0);
  std::vector<double> a(2000), b(2000);
  for (auto& x : a) x = g(rng);
  for (auto& x : b) x = e(rng);
  EXPECT_GT(jarque_bera(a).p_value, 0.01);
  EXPECT_LT(jarque_bera(b).p_value, 1e-6);
  EXPECT_THROW(jarque_bera(std::vector<double>(10, 1.0)), ValidationError);
}

TEST(MeanCi, CoversAndShrinks) {
  std::vector<double> v{1.0, 2.0, 3.0, 4.0, 5.0};
  EXPECT_NEAR(mean(v), 3.0, 1e-15);
  auto ci = mean_ci(v, 0.95);
  EXPECT_LT(ci.low, 3.0);
  EXPECT_GT(ci.high, 3.0);
  EXPECT_NEAR(ci.low + ci.high, 6.0, 1e-14);
  // Normal quantile 1.959964 times sd/sqrt(n) = sqrt(2.5/5).
  EXPECT_NEAR(ci.width() / 2.0, 1.959964 * std::sqrt(0.5), 1e-5);
}
