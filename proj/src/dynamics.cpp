#include "leray/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "leray/error.hpp"

namespace leray::dynamics {

using spectral::cplx;
using spectral::Vec3;

std::string scheme_name(Scheme s) {
  return s == Scheme::ito_euler ? "ito_euler" : "stratonovich_midpoint";
}

Scheme parse_scheme(const std::string& name) {
  if (name == "ito_euler") return Scheme::ito_euler;
  if (name == "stratonovich_midpoint") return Scheme::stratonovich_midpoint;
  throw ValidationError("unknown scheme '" + name + "' (expected ito_euler or stratonovich_midpoint)");
}

std::size_t SolverConfig::num_steps() const {
  validate();
  return static_cast<std::size_t>(std::llround(T / dt));
}

void SolverConfig::validate() const {
  if (!(dt > 0.0)) throw ValidationError("dt must be > 0");
  if (!(T >= dt)) throw ValidationError("T must be >= dt");
  const double n = std::round(T / dt);
  if (std::abs(n * dt - T) > 1e-9 * T) throw ValidationError("T must be an integer multiple of dt");
  if (cutoff < 1) throw ValidationError("cutoff M must be >= 1");
  if (save_every < 1) throw ValidationError("save_every must be >= 1");
  if (midpoint_max_iter < 1 || !(midpoint_tol > 0.0)) {
    throw ValidationError("midpoint iteration settings must be positive");
  }
}

int default_save_every(double T, double dt) {
  return std::max(1, static_cast<int>(std::lround(T / 200.0 / dt)));
}

Transport::Transport(int dim, int cutoff, TransportPath path) : cutoff_(cutoff), path_(path) {
  if (path_ == TransportPath::fft) fft_ = std::make_unique<spectral::FftTransport>(dim, cutoff);
}

SpectralField Transport::operator()(const SpectralField& v, const SpectralField& u) {
  if (path_ == TransportPath::fft) return spectral::leray_project(fft_->advect(v, u, cutoff_));
  return transport_term(v, u, cutoff_);
}

SpectralField transport_term(const SpectralField& v, const SpectralField& u, int cutoff) {
  return spectral::leray_project(spectral::advect_direct(v, u, cutoff));
}

SpectralField galerkin_drift_b(const SpectralField& u, double gamma0, int cutoff) {
  return transport_term(spectral::smoothing_K(u, gamma0), u, cutoff);
}

SpectralField galerkin_diffusion_G(const SpectralField& u, std::size_t k_index, int i,
                                   const noise::NoiseBasis& basis, int cutoff) {
  if (k_index >= basis.lattice().size()) throw ValidationError("noise mode outside the basis");
  if (i < 0 || i >= basis.per_mode()) throw ValidationError("noise component index out of range");
  auto target = spectral::Lattice::ball(u.dim(), cutoff);
  return spectral::leray_project(spectral::transport_by_mode(
      u, basis.vector(k_index, i), basis.lattice().mode(k_index), target));
}

SpectralField noise_velocity(const noise::BrownianIncrements& dw, const noise::NoiseBasis& basis,
                             const std::function<double(int)>& coefficient, double kappa) {
  if (dw.cutoff() > basis.max_mode()) throw ValidationError("noise basis does not cover the increments");
  const int d = dw.dim();
  const auto& lat = dw.lattice();
  SpectralField w = SpectralField::zero(d, dw.cutoff());
  const double amp = std::sqrt(corrector::noise_constant(d) * kappa);
  for (std::size_t idx = 0; idx < lat.size(); ++idx) {
    const double c = amp * coefficient(lat.norm2(idx));
    if (c == 0.0) continue;
    auto dst = w.at(idx);
    for (int i = 0; i < d - 1; ++i) {
      const Vec3& a = basis.vector(idx, i);
      const cplx g = c * dw.at(idx, i);
      for (int p = 0; p < d; ++p) dst[p] += a[p] * g;
    }
  }
  return w;
}

GalerkinStepper::GalerkinStepper(const ModelParams& model,
                                 std::optional<noise::ThetaCoefficients> theta,
                                 const SolverConfig& cfg)
    : model_(model),
      theta_(std::move(theta)),
      cfg_(cfg),
      transport_(model.dim, cfg.cutoff, cfg.transport) {
  cfg_.validate();
  if (model_.dim != 2 && model_.dim != 3) throw ValidationError("dimension must be 2 or 3");
  if (!(model_.gamma0 > 0.0)) throw ValidationError("gamma0 must be > 0");
  if (model_.kappa < 0.0) throw ValidationError("kappa must be >= 0");
  if (theta_) {
    if (theta_->dim() != model_.dim) throw ValidationError("noise dimension does not match the model");
    if (theta_->cutoff() > cfg_.cutoff) throw ValidationError("noise cutoff N must not exceed M");
  }
  if (has_noise()) {
    basis_.emplace(model_.dim, cfg_.cutoff);
    if (cfg_.scheme == Scheme::ito_euler) {
      auto mult = corrector::corrector_multiplier(*theta_, *basis_, model_.kappa, cfg_.cutoff, cfg_.cutoff);
      propagator_.emplace(mult.exponential(cfg_.dt));
    }
  }
}

SpectralField GalerkinStepper::inviscid_euler_step(const SpectralField& u) {
  SpectralField v = spectral::smoothing_K(u, model_.gamma0);
  v *= cfg_.dt;
  return u - transport_(v, u);
}

SpectralField GalerkinStepper::ito_step(const SpectralField& u, const SpectralField* w) {
  SpectralField v = spectral::smoothing_K(u, model_.gamma0);
  v *= cfg_.dt;
  if (w) v -= *w;
  SpectralField x = u - transport_(v, u);
  if (propagator_) return propagator_->apply(x);
  return x;
}

namespace {
double real_inner(const SpectralField& a, const SpectralField& b) { return spectral::inner(a, b).real(); }

// Solves the small symmetric system g c = r by Gaussian elimination with
// partial pivoting; g is regularized on the diagonal.
std::vector<double> solve_small(std::vector<double> g, std::vector<double> r, std::size_t n) {
  double trace = 0.0;
  for (std::size_t i = 0; i < n; ++i) trace += g[i * n + i];
  for (std::size_t i = 0; i < n; ++i) g[i * n + i] += 1e-14 * trace + 1e-300;
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t i = c + 1; i < n; ++i)
      if (std::abs(g[i * n + c]) > std::abs(g[piv * n + c])) piv = i;
    if (piv != c) {
      for (std::size_t j = 0; j < n; ++j) std::swap(g[c * n + j], g[piv * n + j]);
      std::swap(r[c], r[piv]);
    }
    for (std::size_t i = c + 1; i < n; ++i) {
      const double f = g[i * n + c] / g[c * n + c];
      for (std::size_t j = c; j < n; ++j) g[i * n + j] -= f * g[c * n + j];
      r[i] -= f * r[c];
    }
  }
  std::vector<double> x(n);
  for (std::size_t i = n; i-- > 0;) {
    double acc = r[i];
    for (std::size_t j = i + 1; j < n; ++j) acc -= g[i * n + j] * x[j];
    x[i] = acc / g[i * n + i];
  }
  return x;
}
}  // namespace

SpectralField GalerkinStepper::midpoint_step(const SpectralField& u, const SpectralField* w) {
  // Fixed-point iteration x <- g(x) with Anderson mixing over the last few
  // iterates; plain iteration contracts slowly once |w| grad is O(1).
  constexpr std::size_t depth = 6;
  const double scale = std::max(spectral::l2_norm(u), 1e-300);
  auto g = [&](const SpectralField& x) {
    SpectralField m = u + x;
    m *= 0.5;
    SpectralField v = spectral::smoothing_K(m, model_.gamma0);
    v *= cfg_.dt;
    if (w) v -= *w;
    return u - transport_(v, m);
  };
  SpectralField x = u;
  std::vector<SpectralField> dg, df;
  std::optional<SpectralField> prev_g, prev_f;
  double residual = 0.0;
  for (int it = 0; it < cfg_.midpoint_max_iter; ++it) {
    SpectralField gx = g(x);
    SpectralField f = gx - x;
    residual = spectral::l2_norm(f) / scale;
    if (residual <= cfg_.midpoint_tol) return gx;
    if (prev_f) {
      df.push_back(f - *prev_f);
      dg.push_back(gx - *prev_g);
      if (df.size() > depth) {
        df.erase(df.begin());
        dg.erase(dg.begin());
      }
    }
    prev_f = f;
    prev_g = gx;
    SpectralField next = gx;
    const std::size_t n = df.size();
    if (n > 0) {
      std::vector<double> gram(n * n), rhs(n);
      for (std::size_t i = 0; i < n; ++i) {
        rhs[i] = real_inner(df[i], f);
        for (std::size_t j = 0; j < n; ++j) gram[i * n + j] = real_inner(df[i], df[j]);
      }
      auto c = solve_small(std::move(gram), std::move(rhs), n);
      for (std::size_t i = 0; i < n; ++i) next.axpy(-c[i], dg[i]);
    }
    x = std::move(next);
  }
  std::ostringstream msg;
  msg << "midpoint fixed point did not converge in " << cfg_.midpoint_max_iter
      << " iterations (relative residual " << residual << ", |u| = " << scale
      << ", dt = " << cfg_.dt << ")";
  throw StepError(msg.str());
}

GalerkinState GalerkinStepper::step(const GalerkinState& state, const noise::BrownianIncrements& dw) {
  if (state.u.cutoff() != cfg_.cutoff || state.u.dim() != model_.dim) {
    throw ValidationError("state does not live on the Galerkin lattice");
  }
  std::optional<SpectralField> w;
  if (has_noise()) {
    if (dw.cutoff() < theta_->cutoff()) throw ValidationError("increments do not cover the noise modes");
    if (std::abs(dw.dt() - cfg_.dt) > 1e-12 * cfg_.dt) throw ValidationError("increment dt does not match the solver dt");
    const auto& th = *theta_;
    auto own = dw.cutoff() == th.cutoff() ? dw : dw.restricted(th.cutoff());
    w = spectral::change_cutoff(
        noise_velocity(own, *basis_, [&th](int n2) { return th.value(n2); }, model_.kappa),
        cfg_.cutoff);
  }
  const SpectralField* wp = w ? &*w : nullptr;
  GalerkinState next{cfg_.scheme == Scheme::ito_euler ? ito_step(state.u, wp) : midpoint_step(state.u, wp),
                     state.t + cfg_.dt, state.step + 1};
  return next;
}

GalerkinState step_sde(GalerkinStepper& stepper, const GalerkinState& state,
                       const noise::BrownianIncrements& dw) {
  return stepper.step(state, dw);
}

namespace {
void check_frame(const SpectralField& u, double scale, double t) {
  const double tol = 1e-9;
  if (spectral::reality_defect(u) > tol * std::max(scale, 1e-300) ||
      spectral::divergence_defect(u) > tol) {
    std::ostringstream msg;
    msg << "state lost reality or divergence-freeness at t = " << t;
    throw RuntimeFailure(msg.str());
  }
}

void save(Trajectory& traj, const SpectralField& u, double t, std::uint64_t step) {
  traj.times.push_back(t);
  traj.steps.push_back(step);
  traj.frames.push_back(u);
}
}  // namespace

Trajectory solve_sde(GalerkinStepper& stepper, const SpectralField& u0, const IncrementSource& source) {
  const auto& cfg = stepper.config();
  const std::size_t n = cfg.num_steps();
  Trajectory traj;
  GalerkinState state{u0, 0.0, 0};
  const double e0 = spectral::l2_norm(u0);
  check_frame(u0, e0, 0.0);
  save(traj, u0, 0.0, 0);
  noise::BrownianIncrements empty(spectral::Lattice::ball(u0.dim(), 1), cfg.dt);
  for (std::size_t s = 0; s < n; ++s) {
    if (stepper.has_noise()) {
      state = stepper.step(state, source(state.step));
    } else {
      state = stepper.step(state, empty);
    }
    // Exact time from the step count keeps grids aligned across runs.
    state.t = static_cast<double>(state.step) * cfg.dt;
    if (e0 > 0.0) traj.max_energy_ratio = std::max(traj.max_energy_ratio, spectral::l2_norm(state.u) / e0);
    if (state.step % static_cast<std::uint64_t>(cfg.save_every) == 0 || s + 1 == n) {
      check_frame(state.u, e0, state.t);
      save(traj, state.u, state.t, state.step);
    }
  }
  return traj;
}

Trajectory solve_viscous_leray(const SpectralField& u0, double gamma0, double kappa, int dim,
                               const SolverConfig& cfg) {
  cfg.validate();
  if (u0.dim() != dim || u0.cutoff() != cfg.cutoff) throw ValidationError("u0 does not match dim/cutoff");
  if (!(kappa > 0.0)) throw ValidationError("kappa must be > 0");
  if (!spectral::is_divergence_free(u0, 1e-10)) throw ValidationError("u0 must be divergence-free");
  const double mu = corrector::limit_viscosity(dim) * kappa;
  Transport transport(dim, cfg.cutoff, cfg.transport);
  const std::size_t n = cfg.num_steps();
  const double e0 = spectral::l2_norm(u0);
  Trajectory traj;
  save(traj, u0, 0.0, 0);
  traj.dissipation.push_back(0.0);
  double dissipated = 0.0;
  SpectralField u = u0;
  for (std::size_t s = 1; s <= n; ++s) {
    SpectralField v = spectral::smoothing_K(u, gamma0);
    v *= cfg.dt;
    u = spectral::heat_semigroup(u - transport(v, u), cfg.dt, mu);
    const double grad = spectral::sobolev_norm(u, 1.0);
    dissipated += mu * cfg.dt * grad * grad;
    const double e = spectral::l2_norm(u);
    if (!std::isfinite(e) || e > 2.0 * e0) {
      std::ostringstream msg;
      msg << "viscous solver blow-up guard: |u_t| = " << e << " > 2 |u_0| = " << 2.0 * e0
          << " at step " << s;
      throw RuntimeFailure(msg.str());
    }
    if (e0 > 0.0) traj.max_energy_ratio = std::max(traj.max_energy_ratio, e / e0);
    if (s % static_cast<std::size_t>(cfg.save_every) == 0 || s == n) {
      const double t = static_cast<double>(s) * cfg.dt;
      check_frame(u, e0, t);
      save(traj, u, t, s);
      traj.dissipation.push_back(dissipated);
    }
  }
  return traj;
}

Trajectory solve_clt_limit(const Trajectory& viscous, double gamma, double gamma0, double kappa,
                           int dim, const SolverConfig& cfg, const IncrementSource& source) {
  cfg.validate();
  if (!(kappa > 0.0)) throw ValidationError("kappa must be > 0");
  const std::size_t n = cfg.num_steps();
  if (viscous.frames.size() != n + 1) {
    throw ValidationError("viscous trajectory grid does not match the solver grid");
  }
  for (std::size_t s = 0; s <= n; ++s) {
    if (viscous.steps[s] != s || std::abs(viscous.times[s] - static_cast<double>(s) * cfg.dt) > 1e-9 * cfg.T) {
      throw ValidationError("viscous trajectory grid does not match the solver grid");
    }
  }
  if (viscous.frames[0].cutoff() != cfg.cutoff || viscous.frames[0].dim() != dim) {
    throw ValidationError("viscous trajectory does not live on the Galerkin lattice");
  }
  const double mu = corrector::limit_viscosity(dim) * kappa;
  Transport transport(dim, cfg.cutoff, cfg.transport);
  noise::NoiseBasis basis(dim, cfg.cutoff);
  auto coef = [gamma](int n2) { return std::pow(static_cast<double>(n2), -0.5 * gamma); };
  SpectralField U = SpectralField::zero(dim, cfg.cutoff);
  Trajectory traj;
  save(traj, U, 0.0, 0);
  for (std::size_t s = 0; s < n; ++s) {
    const SpectralField& ut = viscous.frames[s];
    auto dw = source(s);
    if (dw.cutoff() > cfg.cutoff) throw ValidationError("increments exceed the Galerkin cutoff");
    if (std::abs(dw.dt() - cfg.dt) > 1e-12 * cfg.dt) throw ValidationError("increment dt does not match the solver dt");
    SpectralField w = spectral::change_cutoff(noise_velocity(dw, basis, coef, kappa), cfg.cutoff);
    SpectralField v = spectral::smoothing_K(U, gamma0);
    v *= cfg.dt;
    v -= w;
    SpectralField vt = spectral::smoothing_K(ut, gamma0);
    vt *= cfg.dt;
    SpectralField x = U - transport(v, ut);
    x -= transport(vt, U);
    U = spectral::heat_semigroup(x, cfg.dt, mu);
    const std::size_t step = s + 1;
    if (step % static_cast<std::size_t>(cfg.save_every) == 0 || step == n) {
      const double t = static_cast<double>(step) * cfg.dt;
      check_frame(U, spectral::l2_norm(U), t);
      save(traj, U, t, step);
    }
  }
  return traj;
}

SpectralField fluctuation(const SpectralField& uN, const SpectralField& u_tilde, double eps_N) {
  if (uN.lattice_ptr() != u_tilde.lattice_ptr()) throw ValidationError("fluctuation fields have different cutoffs");
  if (!(eps_N > 0.0)) throw ValidationError("eps_N must be > 0");
  SpectralField out = uN - u_tilde;
  out *= 1.0 / std::sqrt(eps_N);
  return out;
}

}  // namespace leray::dynamics
