#include "leray/statistics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "leray/error.hpp"

namespace leray::experiments {

LineFit fit_line(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ValidationError("fit needs matching x and y");
  const std::size_t n = x.size();
  if (n < 3) throw ValidationError("rate fit needs at least 3 usable points");
  const double mx = mean(x);
  const double my = mean(y);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0) throw ValidationError("rate fit needs distinct x values");
  LineFit fit;
  fit.points = n;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ssr = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - fit.intercept - fit.slope * x[i];
    ssr += r * r;
  }
  fit.stderr_slope = std::sqrt(ssr / static_cast<double>(n - 2) / sxx);
  return fit;
}

double mean(std::span<const double> values) {
  if (values.empty()) throw ValidationError("mean of an empty sample");
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

Interval mean_ci(std::span<const double> values, double level) {
  if (values.size() < 2) throw ValidationError("confidence interval needs at least 2 values");
  if (!(level > 0.0 && level < 1.0)) throw ValidationError("level must lie in (0, 1)");
  const double m = mean(values);
  double s2 = 0.0;
  for (double v : values) s2 += (v - m) * (v - m);
  s2 /= static_cast<double>(values.size() - 1);
  // Two-sided normal quantile by bisection on erfc.
  const double tail = 1.0 - level;
  double lo = 0.0, hi = 10.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (std::erfc(mid / std::sqrt(2.0)) > tail) lo = mid; else hi = mid;
  }
  const double half = 0.5 * (lo + hi) * std::sqrt(s2 / static_cast<double>(values.size()));
  return {m - half, m + half};
}

double moment_root(std::span<const double> values, double q) {
  if (values.empty()) throw ValidationError("moment of an empty sample");
  double acc = 0.0;
  for (double v : values) acc += std::pow(std::abs(v), q);
  return std::pow(acc / static_cast<double>(values.size()), 1.0 / q);
}

namespace {
void check_bootstrap_args(std::size_t n, double q, double level, int resamples) {
  if (n < 10) throw ValidationError("bootstrap needs at least 10 samples");
  if (!(q >= 1.0)) throw ValidationError("moment order q must be >= 1");
  if (!(level > 0.0 && level < 1.0)) throw ValidationError("level must lie in (0, 1)");
  if (resamples < 10) throw ValidationError("bootstrap needs at least 10 resamples");
}

Interval percentile_interval(std::vector<double> stats, double level) {
  std::sort(stats.begin(), stats.end());
  const double a = 0.5 * (1.0 - level);
  auto pick = [&](double p) {
    const double pos = p * static_cast<double>(stats.size() - 1);
    const auto i = static_cast<std::size_t>(std::floor(pos));
    const std::size_t j = std::min(i + 1, stats.size() - 1);
    const double f = pos - static_cast<double>(i);
    return stats[i] + f * (stats[j] - stats[i]);
  };
  return {pick(a), pick(1.0 - a)};
}
}  // namespace

Interval bootstrap_ci(std::span<const double> values, double q, double level, std::uint64_t seed,
                      int resamples) {
  check_bootstrap_args(values.size(), q, level, resamples);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, values.size() - 1);
  std::vector<double> stats(static_cast<std::size_t>(resamples));
  std::vector<double> draw(values.size());
  for (auto& s : stats) {
    for (auto& d : draw) d = values[pick(rng)];
    s = moment_root(draw, q);
  }
  return percentile_interval(std::move(stats), level);
}

double sup_moment_root(std::span<const double> matrix, std::size_t samples, std::size_t times, double q) {
  if (matrix.size() != samples * times || samples == 0) throw ValidationError("matrix shape mismatch");
  double best = 0.0;
  for (std::size_t t = 0; t < times; ++t) {
    double acc = 0.0;
    for (std::size_t s = 0; s < samples; ++s) acc += std::pow(std::abs(matrix[s * times + t]), q);
    best = std::max(best, acc / static_cast<double>(samples));
  }
  return std::pow(best, 1.0 / q);
}

Interval bootstrap_sup_ci(std::span<const double> matrix, std::size_t samples, std::size_t times,
                          double q, double level, std::uint64_t seed, int resamples) {
  check_bootstrap_args(samples, q, level, resamples);
  if (matrix.size() != samples * times) throw ValidationError("matrix shape mismatch");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, samples - 1);
  std::vector<double> stats(static_cast<std::size_t>(resamples));
  std::vector<double> draw(samples * times);
  for (auto& s : stats) {
    for (std::size_t r = 0; r < samples; ++r) {
      const std::size_t src = pick(rng);
      std::copy_n(matrix.begin() + static_cast<std::ptrdiff_t>(src * times), times,
                  draw.begin() + static_cast<std::ptrdiff_t>(r * times));
    }
    s = sup_moment_root(draw, samples, times, q);
  }
  return percentile_interval(std::move(stats), level);
}

NormalityTest jarque_bera(std::span<const double> values) {
  const std::size_t n = values.size();
  if (n < 8) throw ValidationError("normality test needs at least 8 values");
  const double m = mean(values);
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double v : values) {
    const double d = v - m;
    m2 += d * d;
    m3 += d * d * d;
    m4 += d * d * d * d;
  }
  m2 /= static_cast<double>(n);
  m3 /= static_cast<double>(n);
  m4 /= static_cast<double>(n);
  NormalityTest out;
  if (m2 == 0.0) throw ValidationError("normality test needs non-constant values");
  out.skewness = m3 / std::pow(m2, 1.5);
  out.excess_kurtosis = m4 / (m2 * m2) - 3.0;
  out.statistic = static_cast<double>(n) / 6.0 *
                  (out.skewness * out.skewness + 0.25 * out.excess_kurtosis * out.excess_kurtosis);
  out.p_value = std::exp(-0.5 * out.statistic);
  return out;
}

}  // namespace leray::experiments
