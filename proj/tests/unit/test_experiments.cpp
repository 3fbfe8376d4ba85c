#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <stdexcept>

#include "leray/error.hpp"
#include "leray/experiments.hpp"
#include "leray/noise_model.hpp"

using namespace leray;
using namespace leray::experiments;

namespace {
RateStudyConfig small_main() {
  RateStudyConfig c = default_main_config();
  c.dim = 2;
  c.M = 8;
  c.n_sweep = {2, 4, 8};
  c.samples = 10;
  c.T = 0.01;
  c.dt = 1e-3;
  c.bootstrap_resamples = 50;
  c.initial.cutoff = 3;
  return c;
}

RateStudyConfig small_clt() {
  RateStudyConfig c = default_clt_config();
  c.M = 4;
  c.n_sweep = {1, 2, 4};
  c.samples = 10;
  c.T = 0.01;
  c.dt = 2e-3;
  c.bootstrap_resamples = 50;
  c.initial.cutoff = 2;
  c.gaussianity_samples = 10;
  c.gaussianity_T = 0.004;
  return c;
}

template <class F>
std::string message_of(F&& f) {
  try {
    f();
  } catch (const ValidationError& e) {
    return e.what();
  }
  return "";
}
}  // namespace

TEST(Predictions, Exponents) {
  EXPECT_NEAR(predicted_main_exponent(2, 0.5, 0.9), -0.45, 1e-15);
  EXPECT_NEAR(predicted_main_exponent(3, 1.2, 0.6), (2.4 - 3.0) * 0.6 / 2.0, 1e-15);
  EXPECT_NEAR(predicted_main_exponent(3, 0.3, 0.6), (0.6 - 3.0) * 0.6 / 3.0, 1e-15);
  EXPECT_NEAR(predicted_clt_exponent(1.1, 0.7), -0.08, 1e-15);
  EXPECT_NEAR(predicted_clt_moment_exponent(1.1, 0.7, 3.0), -0.24, 1e-15);
}

TEST(Validation, MainMessages) {
  auto c = small_main();
  EXPECT_NO_THROW(validate_main(c));
  c.gamma0 = 1.0;
  EXPECT_EQ(message_of([&] { validate_main(c); }), "gamma0 must lie in ((d-2)/4,(d+2)/4)");
  c = small_main();
  c.q = 2.0;
  EXPECT_EQ(message_of([&] { validate_main(c); }), "q must exceed max{2, 4/(4*gamma0-d+2)}");
  c = small_main();
  c.alpha = 1.0;
  EXPECT_EQ(message_of([&] { validate_main(c); }), "alpha must lie in (0, min(2*gamma0, 1))");
  c = small_main();
  c.n_sweep = {2, 16};
  EXPECT_EQ(message_of([&] { validate_main(c); }), "noise cutoff N must not exceed the Galerkin cutoff M");
  c = small_main();
  c.n_sweep = {4, 4};
  EXPECT_FALSE(message_of([&] { validate_main(c); }).empty());
  c = small_main();
  c.gamma = 1.0;
  EXPECT_EQ(message_of([&] { validate_main(c); }), "gamma must lie in (0, d/2)");
  c = small_main();
  c.samples = 9;
  EXPECT_FALSE(message_of([&] { validate_main(c); }).empty());
}

TEST(Validation, MainAcceptsInteriorGrid) {
  int checked = 0;
  for (int d : {2, 3}) {
    const double lo = (d - 2) / 4.0, hi = (d + 2) / 4.0;
    for (double g0 = lo + 0.05; g0 < hi; g0 += 0.1) {
      const double qmin = std::max(2.0, 4.0 / (4.0 * g0 - d + 2.0));
      for (double gamma = 0.1; gamma < d / 2.0; gamma += 0.2) {
        for (double frac : {0.1, 0.5, 0.95}) {
          auto c = small_main();
          c.dim = d;
          c.gamma0 = g0;
          c.gamma = gamma;
          c.q = qmin * 1.01;
          c.alpha = frac * std::min(2.0 * g0, 1.0);
          EXPECT_NO_THROW(validate_main(c)) << d << " " << g0 << " " << gamma << " " << frac;
          ++checked;
        }
      }
    }
  }
  EXPECT_GT(checked, 100);
}

TEST(Validation, CltMessages) {
  auto c = small_clt();
  EXPECT_NO_THROW(validate_clt(c));
  c.dim = 2;
  EXPECT_EQ(message_of([&] { validate_clt(c); }),
            "clt study requires dim = 3 (the central limit theorem is stated for d = 3)");
  c = small_clt();
  c.gamma = 0.9;
  EXPECT_EQ(message_of([&] { validate_clt(c); }), "gamma must lie in (1, 3/2) for the clt study");
  c = small_clt();
  c.alpha = 0.5;
  EXPECT_EQ(message_of([&] { validate_clt(c); }), "alpha0 must lie in (1/2, min(1, 2*gamma0))");
  c = small_clt();
  c.q = 2.0;
  EXPECT_EQ(message_of([&] { validate_clt(c); }), "q must exceed max{2, 4/(4*gamma0-1)}");
  c = small_clt();
  c.gaussian_mode = {0, 0, 9};
  EXPECT_FALSE(message_of([&] { validate_clt(c); }).empty());
}

TEST(InitialField, NormSupportAndDeterminism) {
  InitialCondition ic{3, 11, 2.5, 1.0};
  auto u = make_initial_field(ic, 3, 6);
  EXPECT_NEAR(spectral::l2_norm(u), 2.5, 1e-13);
  EXPECT_LT(spectral::divergence_defect(u), 1e-14);
  EXPECT_EQ(spectral::reality_defect(u), 0.0);
  const auto& lat = u.lattice();
  for (std::size_t i = 0; i < lat.size(); ++i) {
    if (lat.norm2(i) > 9) {
      for (int c = 0; c < 3; ++c) EXPECT_EQ(u.at(i)[c], spectral::cplx(0.0, 0.0));
    }
  }
  EXPECT_EQ(spectral::max_abs_diff(u, make_initial_field(ic, 3, 6)), 0.0);
  ic.seed = 12;
  EXPECT_GT(spectral::max_abs_diff(u, make_initial_field(ic, 3, 6)), 0.0);
  ic.norm = 0.0;
  EXPECT_EQ(spectral::l2_norm(make_initial_field(ic, 3, 6)), 0.0);
  ic.cutoff = 7;
  EXPECT_THROW(make_initial_field(ic, 3, 6), ValidationError);
}

TEST(ParallelFor, VisitsEachIndexOnceAndPropagatesErrors) {
  std::vector<std::atomic<int>> hits(50);
  parallel_for(hits.size(), 3, [&](std::size_t i, int worker) {
    EXPECT_GE(worker, 0);
    EXPECT_LT(worker, 3);
    hits[i].fetch_add(1);
  });
  for (auto& h : hits) EXPECT_EQ(h.load(), 1);
  EXPECT_THROW(parallel_for(10, 2,
                            [](std::size_t i, int) {
                              if (i == 7) throw std::runtime_error("boom");
                            }),
               std::runtime_error);
  EXPECT_GE(resolve_threads(0), 1);
  EXPECT_EQ(resolve_threads(4), 4);
}

TEST(MainStudy, ZeroInitialDataGivesZeroError) {
  auto c = small_main();
  c.initial.norm = 0.0;
  auto recs = run_main_rate_study(c, {});
  ASSERT_EQ(recs.size(), 3u);
  for (const auto& r : recs) {
    EXPECT_EQ(r.error, 0.0);
    EXPECT_EQ(r.error_fine, 0.0);
    EXPECT_EQ(r.samples_used, 10);
  }
  EXPECT_THROW(fit_rate(recs), ValidationError);
}

TEST(MainStudy, RecordsAreThreadIndependent) {
  auto c = small_main();
  int callbacks = 0;
  RunOptions one;
  one.threads = 1;
  one.on_record = [&](const ExperimentRecord&) { ++callbacks; };
  RunOptions three;
  three.threads = 3;
  auto a = run_main_rate_study(c, one);
  auto b = run_main_rate_study(c, three);
  EXPECT_EQ(callbacks, 3);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].N, c.n_sweep[i]);
    EXPECT_GT(a[i].error, 0.0);
    EXPECT_EQ(a[i].error, b[i].error);
    EXPECT_EQ(a[i].ci_low, b[i].ci_low);
    EXPECT_EQ(a[i].ci_high, b[i].ci_high);
    EXPECT_EQ(a[i].error_fine, b[i].error_fine);
    EXPECT_LE(a[i].ci_low, a[i].error);
    EXPECT_GE(a[i].ci_high, a[i].error);
    EXPECT_NEAR(a[i].epsilon_N, noise::theta_coeffs(2, c.gamma, c.n_sweep[i]).epsilon(), 1e-15);
  }
}

TEST(CltStudy, SmallRunIsDeterministic) {
  auto c = small_clt();
  RunOptions two;
  two.threads = 2;
  auto a = run_clt_study(c, {});
  auto b = run_clt_study(c, two);
  ASSERT_EQ(a.size(), 3u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_GT(a[i].error, 0.0);
    EXPECT_EQ(a[i].error, b[i].error);
  }
  auto g = run_clt_gaussianity(c, {});
  EXPECT_EQ(g.samples, 10);
  EXPECT_GE(g.test.p_value, 0.0);
  EXPECT_LE(g.test.p_value, 1.0);
}

TEST(FitRate, ExcludesNonpositiveErrors) {
  std::vector<ExperimentRecord> recs;
  for (int n : {2, 4, 8, 16}) {
    ExperimentRecord r;
    r.N = n;
    r.error = 2.0 * std::pow(n, -0.5);
    r.epsilon_N = 1.0 / n;
    recs.push_back(r);
  }
  recs[0].error = 0.0;
  auto f = fit_rate(recs);
  EXPECT_EQ(f.excluded, 1);
  EXPECT_NEAR(f.log_n.slope, -0.5, 1e-14);
  EXPECT_NEAR(f.log_eps.slope, 0.5, 1e-14);
}

TEST(CorrectorSweep, RowsAndBand) {
  CorrectorSweepConfig c;
  c.dim = 3;
  c.gamma = 1.2;
  c.alphas = {0.0, 1.0};
  c.n_sweep = {2, 4};
  auto rows = run_corrector_sweep(c);
  ASSERT_EQ(rows.size(), 4u);
  for (const auto& r : rows) {
    auto th = noise::theta_coeffs(3, 1.2, r.N);
    EXPECT_NEAR(r.epsilon_N, th.epsilon(), 1e-15);
    EXPECT_NEAR(r.D_N, noise::decreasing_factor_DN(th), 1e-12);
    EXPECT_EQ(r.mode_range, 2 * r.N);
    EXPECT_GT(r.ratio, 0.0);
    EXPECT_GT(r.ratio_extended, 0.0);
  }
  EXPECT_GE(ratio_band(rows, 1.0), 1.0);
  EXPECT_THROW(ratio_band(rows, 0.5), ValidationError);
  c.alphas = {1.5};
  EXPECT_THROW(run_corrector_sweep(c), ValidationError);
}

TEST(CorrectorSweep, BandFromHandRows) {
  std::vector<CorrectorRow> rows(3);
  const double r[] = {1.0, 4.0, 2.0};
  for (int i = 0; i < 3; ++i) {
    rows[i].alpha = 0.5;
    rows[i].ratio = r[i];
  }
  EXPECT_NEAR(ratio_band(rows, 0.5), 4.0, 1e-15);
}
