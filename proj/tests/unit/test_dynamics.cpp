#include <gtest/gtest.h>

#include <cmath>

#include "leray/dynamics.hpp"
#include "leray/error.hpp"
#include "leray/fft_transform.hpp"
#include "support.hpp"

using namespace leray;
using namespace leray::dynamics;
using leray::testing::mode;
using leray::testing::random_div_free;
using spectral::cplx;

namespace {
SolverConfig make_cfg(double dt, double T, int M, Scheme scheme = Scheme::ito_euler, int save_every = 1) {
  SolverConfig c;
  c.dt = dt;
  c.T = T;
  c.cutoff = M;
  c.scheme = scheme;
  c.save_every = save_every;
  return c;
}

SpectralField unit_pair(int dim, int M, const spectral::Mode& k) {
  auto f = spectral::frame_vectors(k, dim);
  std::array<cplx, 3> v{};
  for (int c = 0; c < dim; ++c) v[c] = cplx(0.4, -0.3) * f[0][c];
  return spectral::single_pair(dim, M, k, std::span<const cplx>(v.data(), dim));
}
}  // namespace

TEST(Transport, SingleShellPairIsInert) {
  for (int d : {2, 3}) {
    auto u = unit_pair(d, 4, d == 2 ? mode(1, 2) : mode(1, 0, 1));
    EXPECT_LT(spectral::l2_norm(transport_term(u, u, 4)), 1e-15);
    EXPECT_LT(spectral::l2_norm(galerkin_drift_b(u, 0.6, 4)), 1e-15);
    EXPECT_EQ(spectral::l2_norm(transport_term(SpectralField::zero(d, 4), u, 4)), 0.0);
  }
}

TEST(Transport, FftPathMatchesDirectPath) {
  for (int d : {2, 3}) {
    auto v = random_div_free(d, 6, 1);
    auto u = random_div_free(d, 6, 2);
    Transport fft(d, 6, TransportPath::fft);
    Transport direct(d, 6, TransportPath::direct);
    auto a = fft(v, u);
    auto b = direct(v, u);
    EXPECT_LT(spectral::max_abs_diff(a, b), 1e-10 * spectral::l2_norm(b));
    EXPECT_LT(spectral::divergence_defect(a), 1e-13);
  }
}

TEST(Drift, OrthogonalToState) {
  for (int d : {2, 3}) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      auto u = random_div_free(d, 5, seed);
      const double u2 = std::pow(spectral::l2_norm(u), 2);
      EXPECT_LT(std::abs(spectral::inner(galerkin_drift_b(u, 0.6, 5), u).real()), 1e-12 * u2);
    }
  }
}

TEST(Diffusion, VanishesOnOwnShellAndIsSkew) {
  for (int d : {2, 3}) {
    noise::NoiseBasis basis(d, 3);
    const auto k = d == 2 ? mode(1, 1) : mode(0, 1, 1);
    const std::size_t ki = *basis.lattice().find(k);
    auto own = unit_pair(d, 5, k);
    EXPECT_LT(spectral::l2_norm(galerkin_diffusion_G(own, ki, 0, basis, 5)), 1e-15);
    auto u1 = random_div_free(d, 5, 10);
    auto u2 = random_div_free(d, 5, 11);
    for (int i = 0; i < d - 1; ++i) {
      auto g = galerkin_diffusion_G(u1, ki, i, basis, 5);
      const double n2 = std::pow(spectral::l2_norm(u1), 2);
      EXPECT_LT(std::abs(spectral::inner(g, u1)), 1e-12 * n2);
      auto sum = galerkin_diffusion_G(u1 + u2, ki, i, basis, 5);
      auto parts = g + galerkin_diffusion_G(u2, ki, i, basis, 5);
      EXPECT_LT(spectral::max_abs_diff(sum, parts), 1e-13 * spectral::l2_norm(sum));
    }
  }
}

TEST(Stepper, NoiseFreeStepIsInviscidEuler) {
  auto u = random_div_free(2, 8, 3);
  GalerkinStepper st({2, 0.6, 0.0}, noise::theta_coeffs(2, 0.5, 4), make_cfg(1e-3, 0.01, 8));
  EXPECT_FALSE(st.has_noise());
  noise::BrownianIncrements dw(spectral::Lattice::ball(2, 4), 1e-3);
  auto next = st.step({u, 0.0, 0}, dw);
  auto euler = st.inviscid_euler_step(u);
  EXPECT_EQ(spectral::max_abs_diff(next.u, euler), 0.0);
  auto b = galerkin_drift_b(u, 0.6, 8);
  EXPECT_LT(spectral::max_abs_diff(euler, u - 1e-3 * b), 1e-15);
}

TEST(Stepper, NoiseFreeEnergyDriftIsSecondOrder) {
  auto u = random_div_free(2, 8, 4);
  const double e0 = std::pow(spectral::l2_norm(u), 2);
  auto drift = [&](double dt) {
    GalerkinStepper st({2, 0.6, 0.0}, std::nullopt, make_cfg(dt, dt, 8));
    return std::abs(std::pow(spectral::l2_norm(st.inviscid_euler_step(u)), 2) - e0);
  };
  const double ratio = drift(2e-3) / drift(1e-3);
  EXPECT_NEAR(ratio, 4.0, 0.1);
}

TEST(Stepper, TwoStepsAgainstHandAssembledUpdate) {
  // Oracle: direct convolution transport, explicit noise velocity from the
  // frame vectors, and exp(dt S) by Taylor series of the literal double sum.
  const int d = 2, M = 3;
  const double dt = 1e-3, kappa = 0.05, gamma0 = 0.6;
  auto theta = noise::theta_coeffs(d, 0.5, 1);
  noise::NoiseBasis basis(d, M);
  auto u = unit_pair(d, M, mode(1, 0));
  GalerkinStepper st({d, gamma0, kappa}, theta, make_cfg(dt, 2 * dt, M));
  GalerkinState state{u, 0.0, 0};
  for (std::uint64_t s = 0; s < 2; ++s) {
    auto dw = noise::sample_increments(d, 1, dt, {3, 0}, s);
    SpectralField w(spectral::Lattice::ball(d, M));
    const auto& kl = dw.lattice();
    for (std::size_t m = 0; m < kl.size(); ++m) {
      const double c = std::sqrt(2.0 * kappa) * theta.value(kl.norm2(m));
      for (int p = 0; p < d; ++p) w.at(m)[p] += c * basis.vector(m, 0)[p] * dw.at(m, 0);
    }
    auto v = spectral::smoothing_K(u, gamma0);
    v *= dt;
    auto x = u - spectral::leray_project(spectral::advect_direct(v - w, u, M));
    SpectralField term = x, expected = x;
    for (int n = 1; n < 30; ++n) {
      term = corrector::corrector_direct(term, theta, basis, kappa, M);
      term *= dt / n;
      expected += term;
    }
    state = st.step(state, dw);
    EXPECT_LT(spectral::max_abs_diff(state.u, expected), 1e-13) << "step " << s;
    u = expected;
  }
}

TEST(Stepper, MidpointConservesEnergy) {
  auto u = random_div_free(2, 12, 5);
  GalerkinStepper st({2, 0.6, 0.01}, noise::theta_coeffs(2, 0.5, 4),
                     make_cfg(1e-3, 0.05, 12, Scheme::stratonovich_midpoint, 10));
  auto traj = solve_sde(st, u, [](std::uint64_t s) { return noise::sample_increments(2, 4, 1e-3, {1, 1}, s); });
  for (const auto& f : traj.frames) EXPECT_NEAR(spectral::l2_norm(f), spectral::l2_norm(u), 1e-9);
}

TEST(Stepper, MidpointReportsNonConvergence) {
  auto u = random_div_free(2, 8, 6);
  auto cfg = make_cfg(1e-3, 0.01, 8, Scheme::stratonovich_midpoint);
  cfg.midpoint_max_iter = 1;
  GalerkinStepper st({2, 0.6, 0.05}, noise::theta_coeffs(2, 0.5, 4), cfg);
  auto dw = noise::sample_increments(2, 4, 1e-3, {1, 1}, 0);
  EXPECT_THROW(st.step({u, 0.0, 0}, dw), StepError);
}

TEST(Stepper, ItoEnergyWithinSlack) {
  auto u = random_div_free(2, 16, 7, 1.0, 4);
  GalerkinStepper st({2, 0.6, 1e-3}, noise::theta_coeffs(2, 0.5, 8), make_cfg(1e-3, 0.5, 16, Scheme::ito_euler, 50));
  auto traj = solve_sde(st, u, [](std::uint64_t s) { return noise::sample_increments(2, 8, 1e-3, {2, 0}, s); });
  EXPECT_LE(traj.max_energy_ratio, 1.05);
}

TEST(SolveSde, SaveGridAndDeterminism) {
  auto u = random_div_free(2, 8, 8);
  auto src = [](std::uint64_t s) { return noise::sample_increments(2, 4, 1e-3, {5, 5}, s); };
  GalerkinStepper a({2, 0.6, 0.02}, noise::theta_coeffs(2, 0.5, 4), make_cfg(1e-3, 0.011, 8, Scheme::ito_euler, 4));
  GalerkinStepper b({2, 0.6, 0.02}, noise::theta_coeffs(2, 0.5, 4), make_cfg(1e-3, 0.011, 8, Scheme::ito_euler, 4));
  auto ta = solve_sde(a, u, src);
  auto tb = solve_sde(b, u, src);
  std::vector<std::uint64_t> expect{0, 4, 8, 11};
  EXPECT_EQ(ta.steps, expect);
  ASSERT_EQ(ta.frames.size(), tb.frames.size());
  for (std::size_t f = 0; f < ta.frames.size(); ++f) EXPECT_EQ(spectral::max_abs_diff(ta.frames[f], tb.frames[f]), 0.0);
  EXPECT_NEAR(ta.times.back(), 0.011, 1e-15);
}

TEST(SolverConfig, Validation) {
  EXPECT_THROW(make_cfg(0.0, 0.1, 8).validate(), ValidationError);
  EXPECT_THROW(make_cfg(3e-3, 0.1, 8).validate(), ValidationError);
  EXPECT_THROW(make_cfg(1e-3, 0.1, 0).validate(), ValidationError);
  EXPECT_NO_THROW(make_cfg(1e-3, 0.1, 8).validate());
  EXPECT_EQ(make_cfg(1e-3, 0.1, 8).num_steps(), 100u);
  EXPECT_EQ(default_save_every(0.2, 1e-3), 1);
  EXPECT_EQ(default_save_every(1.0, 1e-3), 5);
  EXPECT_THROW(parse_scheme("rk4"), ValidationError);
}

TEST(Viscous, SingleShellExactHeatDecay) {
  for (int d : {2, 3}) {
    const auto k = d == 2 ? mode(1, 1) : mode(1, 1, 0);
    auto u = unit_pair(d, 4, k);
    const double kappa = 0.3;
    auto traj = solve_viscous_leray(u, 0.6, kappa, d, make_cfg(1e-4, 0.1, 4, Scheme::ito_euler, 1000));
    const double mu = corrector::limit_viscosity(d) * kappa;
    const double factor = std::exp(-4.0 * spectral::kPi * spectral::kPi * mu * k.norm2() * 0.1);
    EXPECT_LT(spectral::max_abs_diff(traj.frames.back(), factor * u), 1e-10);
  }
}

TEST(Viscous, EnergyInequalityAndMonotonicity) {
  for (int d : {2, 3}) {
    auto u = random_div_free(d, d == 2 ? 16 : 8, 9, 1.0, 4);
    auto traj = solve_viscous_leray(u, 0.6, 0.05, d, make_cfg(1e-3, 0.2, d == 2 ? 16 : 8, Scheme::ito_euler, 5));
    const double e0 = std::pow(spectral::l2_norm(u), 2);
    double prev = spectral::l2_norm(u);
    for (std::size_t f = 0; f < traj.frames.size(); ++f) {
      const double n = spectral::l2_norm(traj.frames[f]);
      EXPECT_LE(n, prev + 1e-8);
      prev = n;
      EXPECT_LE(n * n + traj.dissipation[f], e0 * (1.0 + 1e-6));
    }
  }
}

TEST(Viscous, FirstOrderSelfConvergence) {
  auto u = random_div_free(2, 12, 10, 1.0, 4);
  auto final_state = [&](double dt) {
    return solve_viscous_leray(u, 0.6, 0.05, 2, make_cfg(dt, 0.2, 12, Scheme::ito_euler, 1000000)).frames.back();
  };
  auto a = final_state(2e-3), b = final_state(1e-3), c = final_state(5e-4);
  const double ratio = spectral::l2_norm(a - b) / spectral::l2_norm(b - c);
  EXPECT_NEAR(ratio, 2.0, 0.3);
}

TEST(CltLimit, ZeroBackgroundGivesZero) {
  auto z = SpectralField::zero(3, 4);
  auto cfg = make_cfg(2e-3, 0.02, 4);
  auto visc = solve_viscous_leray(z, 0.8, 0.01, 3, cfg);
  auto U = solve_clt_limit(visc, 1.1, 0.8, 0.01, 3, cfg,
                           [](std::uint64_t s) { return noise::sample_increments(3, 2, 2e-3, {1, 0}, s); });
  for (const auto& f : U.frames) EXPECT_EQ(spectral::l2_norm(f), 0.0);
}

TEST(CltLimit, LinearInDrivingNoise) {
  auto u = random_div_free(3, 5, 12, 1.0, 2);
  auto cfg = make_cfg(2e-3, 0.02, 5);
  auto visc = solve_viscous_leray(u, 0.8, 0.01, 3, cfg);
  auto src = [](std::uint64_t s) { return noise::sample_increments(3, 3, 2e-3, {7, 0}, s); };
  auto U1 = solve_clt_limit(visc, 1.1, 0.8, 0.01, 3, cfg, src);
  auto U2 = solve_clt_limit(visc, 1.1, 0.8, 0.01, 3, cfg, [&](std::uint64_t s) { return src(s).scaled(2.0); });
  EXPECT_GT(spectral::l2_norm(U1.frames.back()), 0.0);
  for (std::size_t f = 0; f < U1.frames.size(); ++f) {
    EXPECT_LT(spectral::max_abs_diff(U2.frames[f], 2.0 * U1.frames[f]), 1e-14 * (1.0 + spectral::l2_norm(U2.frames[f])));
  }
}

TEST(Fluctuation, Identities) {
  auto a = random_div_free(3, 4, 1);
  auto b = random_div_free(3, 4, 2);
  EXPECT_EQ(spectral::l2_norm(fluctuation(a, a, 0.3)), 0.0);
  EXPECT_EQ(spectral::max_abs_diff(fluctuation(a, b, 1.0), a - b), 0.0);
  const double eps = 0.037;
  auto back = std::sqrt(eps) * fluctuation(a, b, eps) + b;
  EXPECT_LT(spectral::max_abs_diff(back, a), 1e-15 * (1.0 + spectral::l2_norm(a)));
}
