#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace leray::experiments {

struct Interval {
  double low = 0.0;
  double high = 0.0;
  double width() const { return high - low; }
};

/// Ordinary least squares y = intercept + slope x with the residual-based
/// standard error of the slope. Needs at least 3 points.
struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double stderr_slope = 0.0;
  std::size_t points = 0;
};
LineFit fit_line(std::span<const double> x, std::span<const double> y);

/// (mean |x|^q)^{1/q}
double moment_root(std::span<const double> values, double q);

/// Percentile bootstrap of moment_root over `resamples` resamples drawn with a
/// generator seeded from `seed`. Needs at least 10 values, q >= 1, level in (0,1).
Interval bootstrap_ci(std::span<const double> values, double q, double level, std::uint64_t seed,
                      int resamples = 2000);

/// Statistic max_t (mean_s |x_{s,t}|^q)^{1/q} for a samples x times matrix
/// (row-major, one row per sample), i.e. sup over time of the moment root.
double sup_moment_root(std::span<const double> matrix, std::size_t samples, std::size_t times, double q);

/// Percentile bootstrap of sup_moment_root, resampling rows.
Interval bootstrap_sup_ci(std::span<const double> matrix, std::size_t samples, std::size_t times,
                          double q, double level, std::uint64_t seed, int resamples = 2000);

/// Jarque-Bera normality test; the p-value uses the chi-square(2) tail exp(-JB/2).
struct NormalityTest {
  double statistic = 0.0;
  double p_value = 0.0;
  double skewness = 0.0;
  double excess_kurtosis = 0.0;
};
NormalityTest jarque_bera(std::span<const double> values);

double mean(std::span<const double> values);
/// Mean with a normal-approximation confidence interval at the given level.
Interval mean_ci(std::span<const double> values, double level);

}  // namespace leray::experiments
