#include <gtest/gtest.h>

#include <cmath>

#include "leray/error.hpp"
#include "leray/noise_model.hpp"
#include "leray/statistics.hpp"
#include "support.hpp"

using namespace leray;
using namespace leray::noise;
using leray::testing::mode;

TEST(Theta, UnitShellCounts) {
  EXPECT_NEAR(theta_coeffs(3, 1.3, 1).epsilon(), 1.0 / 6.0, 1e-15);
  EXPECT_NEAR(theta_coeffs(3, 1.3, 1).value(1), 1.0 / std::sqrt(6.0), 1e-15);
  EXPECT_NEAR(theta_coeffs(2, 0.5, 1).epsilon(), 0.25, 1e-15);
}

TEST(Theta, EnumeratedEpsilon) {
  // |k|^2 in {1,2,3,4} with counts 6, 12, 8, 6.
  EXPECT_NEAR(theta_coeffs(3, 1.0, 2).epsilon(), 6.0 / 97.0, 1e-15);
}

TEST(Theta, NormalizedAndRadial) {
  for (int d : {2, 3}) {
    auto th = theta_coeffs(d, 0.7, 7);
    const auto& lat = *th.lattice_ptr();
    double sum = 0.0;
    for (std::size_t i = 0; i < lat.size(); ++i) sum += th.squared(lat.norm2(i));
    EXPECT_NEAR(sum, 1.0, 1e-12);
    EXPECT_EQ(th.value(mode(3, 4, 0)), th.value(mode(0, 5, 0)));
    EXPECT_EQ(th.value(mode(8, 0, 0)), 0.0);
  }
}

TEST(Theta, RejectsOutOfRangeGamma) {
  EXPECT_THROW(theta_coeffs(2, 1.0, 4), ValidationError);
  EXPECT_THROW(theta_coeffs(3, 0.0, 4), ValidationError);
  EXPECT_THROW(theta_coeffs(3, 1.0, 0), ValidationError);
}

TEST(DecreasingFactor, Values) {
  for (int d : {2, 3}) EXPECT_NEAR(decreasing_factor_DN(theta_coeffs(d, 0.4, 1)), 1.0, 1e-15);
  const double oracle =
      6.0 / 97.0 * (6.0 + 12.0 * std::pow(2.0, -1.5) + 8.0 * std::pow(3.0, -1.5) + 6.0 * std::pow(4.0, -1.5));
  EXPECT_NEAR(decreasing_factor_DN(theta_coeffs(3, 1.0, 2)), oracle, 1e-15);
}

TEST(DecreasingFactor, PowerLawRegime) {
  std::vector<double> x, y;
  for (int n : {8, 16, 32, 64}) {
    x.push_back(std::log(n));
    y.push_back(std::log(decreasing_factor_DN(theta_coeffs(3, 1.2, n))));
  }
  EXPECT_NEAR(experiments::fit_line(x, y).slope, 2.0 * 1.2 - 3.0, 0.15);
}

TEST(DecreasingFactor, EpsilonBound) {
  const double q = 0.9;
  auto th1 = theta_coeffs(3, 1.0, 1);
  EXPECT_NEAR(check_DN_epsilon_bound(th1, q), std::pow(th1.epsilon(), -q), 1e-12);
  auto band = [](int d, double gamma, double q) {
    double lo = 1e300, hi = 0.0;
    for (int n : {2, 4, 8, 16, 32}) {
      const double r = check_DN_epsilon_bound(theta_coeffs(d, gamma, n), q);
      lo = std::min(lo, r);
      hi = std::max(hi, r);
    }
    return hi / lo;
  };
  EXPECT_LT(band(3, 1.0, 0.9), 10.0);
  EXPECT_LT(band(2, 0.75, 0.5), 10.0);
}

TEST(Increments, ConjugationAndDeterminism) {
  auto a = sample_increments(3, 3, 0.01, {5, 2}, 17);
  auto b = sample_increments(3, 3, 0.01, {5, 2}, 17);
  auto c = sample_increments(3, 3, 0.01, {5, 3}, 17);
  const auto& lat = a.lattice();
  bool differs = false;
  for (std::size_t m = 0; m < lat.size(); ++m) {
    for (int i = 0; i < 2; ++i) {
      EXPECT_EQ(a.at(m, i), std::conj(a.at(lat.conjugate(m), i)));
      EXPECT_EQ(a.at(m, i), b.at(m, i));
      differs = differs || a.at(m, i) != c.at(m, i);
    }
  }
  EXPECT_TRUE(differs);
}

TEST(Increments, SmallerBallIsPrefix) {
  auto big = sample_increments(2, 6, 0.01, {9, 1}, 3);
  auto small = sample_increments(2, 2, 0.01, {9, 1}, 3);
  auto restricted = big.restricted(2);
  ASSERT_EQ(small.entries().size(), restricted.entries().size());
  for (std::size_t i = 0; i < small.entries().size(); ++i) {
    EXPECT_EQ(small.entries()[i], restricted.entries()[i]);
    EXPECT_EQ(small.entries()[i], big.entries()[i]);
  }
}

TEST(Increments, RefinedSumsFineSteps) {
  auto sum = sample_refined_increments(2, 3, 0.001, {4, 0}, 6, 3);
  auto expect = sample_increments(2, 3, 0.001, {4, 0}, 6);
  expect.accumulate(sample_increments(2, 3, 0.001, {4, 0}, 7));
  expect.accumulate(sample_increments(2, 3, 0.001, {4, 0}, 8));
  EXPECT_NEAR(sum.dt(), 0.003, 1e-15);
  for (std::size_t i = 0; i < sum.entries().size(); ++i) {
    EXPECT_NEAR(std::abs(sum.entries()[i] - expect.entries()[i]), 0.0, 1e-15);
  }
}

TEST(Increments, CovarianceMonteCarlo) {
  // 2D, |k| = 1: canonical modes (0,1) and (1,0), one frame vector each.
  const int n = 100000;
  const double dt = 0.01;
  std::vector<double> self, cross_pair, cross_other;
  self.reserve(n);
  for (int s = 0; s < n; ++s) {
    auto w = sample_increments(2, 1, dt, {123, static_cast<std::uint64_t>(s)}, 0);
    const auto& lat = w.lattice();
    const std::size_t k = *lat.find(mode(1, 0));
    const std::size_t l = *lat.find(mode(0, 1));
    self.push_back(std::norm(w.at(k, 0)));
    // E[W^{k} W^{k}] = 0 and E[W^{k} W^{l}] = 0 for l != -k.
    cross_pair.push_back((w.at(k, 0) * w.at(k, 0)).real());
    cross_other.push_back((w.at(k, 0) * w.at(l, 0)).real());
  }
  auto check = [&](const std::vector<double>& v, double target) {
    const double m = experiments::mean(v);
    double var = 0.0;
    for (double x : v) var += (x - m) * (x - m);
    const double se = std::sqrt(var / (v.size() - 1.0) / v.size());
    EXPECT_LT(std::abs(m - target), 3.0 * se) << "mean " << m << " target " << target;
  };
  check(self, 2.0 * dt);
  check(cross_pair, 0.0);
  check(cross_other, 0.0);
}
