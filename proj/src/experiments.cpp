#include "leray/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <memory>
#include <mutex>
#include <thread>

#include "leray/error.hpp"

namespace leray::experiments {

using dynamics::GalerkinStepper;
using dynamics::SolverConfig;
using spectral::SpectralField;

namespace {
std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derived_seed(std::uint64_t seed, std::uint64_t tag, std::uint64_t n) {
  return mix(mix(seed ^ tag) ^ n);
}

constexpr std::uint64_t kBootstrapTag = 0x626f6f74ULL;
constexpr std::uint64_t kGaussTag = 0x67617573ULL;

// Stride of the refined save grid used for the save-spacing sensitivity.
int fine_stride(int stride) { return stride % 2 == 0 ? stride / 2 : 1; }

bool on_default_grid(std::uint64_t step, int stride, std::uint64_t last) {
  return step % static_cast<std::uint64_t>(stride) == 0 || step == last;
}
}  // namespace

SpectralField make_initial_field(const InitialCondition& ic, int dim, int cutoff) {
  if (ic.cutoff < 1 || ic.cutoff > cutoff) {
    throw ValidationError("initial cutoff must lie in [1, M]");
  }
  if (ic.norm < 0.0) throw ValidationError("initial norm must be >= 0");
  auto lat = spectral::Lattice::ball(dim, cutoff);
  if (ic.norm == 0.0) return SpectralField(lat);
  std::mt19937_64 rng(ic.seed);
  SpectralField u = spectral::random_field(lat, rng, ic.decay, true, ic.cutoff);
  u *= ic.norm / spectral::l2_norm(u);
  return u;
}

int RateStudyConfig::effective_save_every() const {
  return save_every > 0 ? save_every : dynamics::default_save_every(T, dt);
}

SolverConfig RateStudyConfig::solver_config() const {
  SolverConfig s;
  s.dt = dt;
  s.T = T;
  s.scheme = scheme;
  s.cutoff = M;
  s.save_every = effective_save_every();
  s.transport = transport;
  return s;
}

RateStudyConfig default_main_config() { return RateStudyConfig{}; }

RateStudyConfig default_clt_config() {
  RateStudyConfig c;
  c.dim = 3;
  c.gamma = 1.1;
  c.gamma0 = 0.8;
  c.kappa = 0.01;
  c.q = 3.0;
  c.alpha = 0.7;
  c.n_sweep = {2, 4, 8};
  c.M = 12;
  c.samples = 32;
  c.T = 0.2;
  c.dt = 2e-3;
  c.initial.cutoff = 3;
  return c;
}

void validate_common(const RateStudyConfig& cfg) {
  if (cfg.dim != 2 && cfg.dim != 3) throw ValidationError("dim must be 2 or 3");
  if (!(cfg.gamma > 0.0 && cfg.gamma < 0.5 * cfg.dim)) throw ValidationError("gamma must lie in (0, d/2)");
  if (!(cfg.kappa > 0.0)) throw ValidationError("kappa must be > 0");
  if (cfg.M < 1) throw ValidationError("Galerkin cutoff M must be >= 1");
  if (cfg.n_sweep.empty()) throw ValidationError("n_sweep must not be empty");
  for (std::size_t i = 0; i < cfg.n_sweep.size(); ++i) {
    if (cfg.n_sweep[i] < 1) throw ValidationError("noise cutoffs N must be >= 1");
    if (cfg.n_sweep[i] > cfg.M) throw ValidationError("noise cutoff N must not exceed the Galerkin cutoff M");
    if (i > 0 && cfg.n_sweep[i] <= cfg.n_sweep[i - 1]) throw ValidationError("n_sweep must be strictly increasing");
  }
  if (cfg.samples < 10) throw ValidationError("samples must be >= 10");
  if (!(cfg.q >= 1.0)) throw ValidationError("q must be >= 1");
  if (!(cfg.ci_level > 0.0 && cfg.ci_level < 1.0)) throw ValidationError("ci_level must lie in (0, 1)");
  if (cfg.bootstrap_resamples < 10) throw ValidationError("bootstrap_resamples must be >= 10");
  if (cfg.save_every < 0) throw ValidationError("save_every must be >= 0");
  cfg.solver_config().validate();
  if (cfg.initial.cutoff < 1 || cfg.initial.cutoff > cfg.M) throw ValidationError("initial cutoff must lie in [1, M]");
  if (cfg.initial.norm < 0.0) throw ValidationError("initial norm must be >= 0");
}

void validate_main(const RateStudyConfig& cfg) {
  validate_common(cfg);
  const double d = cfg.dim;
  if (!(cfg.gamma0 > (d - 2.0) / 4.0 && cfg.gamma0 < (d + 2.0) / 4.0)) {
    throw ValidationError("gamma0 must lie in ((d-2)/4,(d+2)/4)");
  }
  if (!(cfg.q > std::max(2.0, 4.0 / (4.0 * cfg.gamma0 - d + 2.0)))) {
    throw ValidationError("q must exceed max{2, 4/(4*gamma0-d+2)}");
  }
  if (!(cfg.alpha > 0.0 && cfg.alpha < std::min(2.0 * cfg.gamma0, 1.0))) {
    throw ValidationError("alpha must lie in (0, min(2*gamma0, 1))");
  }
}

void validate_clt(const RateStudyConfig& cfg) {
  if (cfg.dim != 3) {
    throw ValidationError("clt study requires dim = 3 (the central limit theorem is stated for d = 3)");
  }
  validate_common(cfg);
  if (!(cfg.gamma > 1.0 && cfg.gamma < 1.5)) throw ValidationError("gamma must lie in (1, 3/2) for the clt study");
  if (!(cfg.gamma0 > 0.25 && cfg.gamma0 < 1.25)) throw ValidationError("gamma0 must lie in ((d-2)/4,(d+2)/4)");
  if (!(cfg.alpha > 0.5 && cfg.alpha < std::min(1.0, 2.0 * cfg.gamma0))) {
    throw ValidationError("alpha0 must lie in (1/2, min(1, 2*gamma0))");
  }
  if (!(cfg.q > std::max(2.0, 4.0 / (4.0 * cfg.gamma0 - 1.0)))) {
    throw ValidationError("q must exceed max{2, 4/(4*gamma0-1)}");
  }
  if (cfg.gaussianity_samples < 8) throw ValidationError("gaussianity_samples must be >= 8");
  RateStudyConfig g = cfg;
  g.T = cfg.gaussianity_T;
  g.solver_config().validate();
  if (cfg.gaussian_mode.size() != 3) throw ValidationError("gaussian_mode needs 3 components");
  spectral::Mode l{{cfg.gaussian_mode[0], cfg.gaussian_mode[1], cfg.gaussian_mode[2]}};
  if (l.is_zero() || l.norm2() > cfg.M * cfg.M) throw ValidationError("gaussian_mode must be a nonzero mode with |k| <= M");
  if (cfg.gaussian_component < 0 || cfg.gaussian_component >= cfg.dim) {
    throw ValidationError("gaussian_component must lie in [0, dim)");
  }
}

double predicted_main_exponent(int dim, double gamma, double alpha) {
  const double denom = gamma > (dim - 2.0) / 2.0 ? 2.0 : static_cast<double>(dim);
  return (2.0 * gamma - dim) * alpha / denom;
}

double predicted_clt_exponent(double gamma, double alpha0) {
  return -(3.0 - 2.0 * gamma) / 2.0 * (alpha0 - 0.5);
}

double predicted_clt_moment_exponent(double gamma, double alpha0, double q) {
  return q * predicted_clt_exponent(gamma, alpha0);
}

int resolve_threads(int requested) {
  if (requested < 0) throw ValidationError("threads must be >= 0");
  if (requested > 0) return requested;
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t, int)>& fn) {
  const int workers = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), std::max<std::size_t>(count, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i, 0);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      while (!failed.load()) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count) return;
        try {
          fn(i, w);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
          failed = true;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

namespace {
// One stepper per (worker, N); steppers own FFT plans and are not shareable.
class StepperCache {
 public:
  StepperCache(int workers, std::size_t ns) : slots_(static_cast<std::size_t>(workers)) {
    for (auto& s : slots_) s.resize(ns);
  }
  GalerkinStepper& get(int worker, std::size_t n_index, const std::function<std::unique_ptr<GalerkinStepper>()>& make) {
    auto& slot = slots_[static_cast<std::size_t>(worker)][n_index];
    if (!slot) slot = make();
    return *slot;
  }

 private:
  std::vector<std::vector<std::unique_ptr<GalerkinStepper>>> slots_;
};

ExperimentRecord base_record(const std::string& study, const RateStudyConfig& cfg, int N,
                             const RunOptions& opts) {
  ExperimentRecord r;
  r.study = study;
  r.N = N;
  auto theta = noise::theta_coeffs(cfg.dim, cfg.gamma, N);
  r.epsilon_N = theta.epsilon();
  r.D_N = noise::decreasing_factor_DN(theta);
  r.config_hash = opts.config_hash;
  r.seed = cfg.seed;
  return r;
}
}  // namespace

std::vector<ExperimentRecord> run_main_rate_study(const RateStudyConfig& cfg, const RunOptions& opts) {
  validate_main(cfg);
  const int threads = resolve_threads(opts.threads);
  const SpectralField u0 = make_initial_field(cfg.initial, cfg.dim, cfg.M);
  SolverConfig solver = cfg.solver_config();
  const int stride = solver.save_every;
  solver.save_every = fine_stride(stride);
  const auto viscous = dynamics::solve_viscous_leray(u0, cfg.gamma0, cfg.kappa, cfg.dim, solver);
  const std::uint64_t last = solver.num_steps();
  const dynamics::ModelParams model{cfg.dim, cfg.gamma0, cfg.kappa};
  StepperCache cache(threads, cfg.n_sweep.size());

  std::vector<ExperimentRecord> out;
  for (std::size_t in = 0; in < cfg.n_sweep.size(); ++in) {
    const int N = cfg.n_sweep[in];
    struct PathResult {
      bool ok = false;
      double sup_default = 0.0;
      double sup_fine = 0.0;
    };
    std::vector<PathResult> results(static_cast<std::size_t>(cfg.samples));
    parallel_for(results.size(), threads, [&](std::size_t s, int worker) {
      auto& stepper = cache.get(worker, in, [&] {
        return std::make_unique<GalerkinStepper>(model, noise::theta_coeffs(cfg.dim, cfg.gamma, N), solver);
      });
      const noise::StreamKey key{cfg.seed, (static_cast<std::uint64_t>(N) << 32) | s};
      try {
        auto traj = dynamics::solve_sde(stepper, u0, [&](std::uint64_t step) {
          return noise::sample_increments(cfg.dim, N, cfg.dt, key, step);
        });
        PathResult r;
        for (std::size_t f = 0; f < traj.frames.size(); ++f) {
          const double e = spectral::sobolev_norm(traj.frames[f] - viscous.frames[f], -cfg.alpha);
          r.sup_fine = std::max(r.sup_fine, e);
          if (on_default_grid(traj.steps[f], stride, last)) r.sup_default = std::max(r.sup_default, e);
        }
        r.ok = true;
        results[s] = r;
      } catch (const RuntimeFailure&) {
        results[s] = PathResult{};
      }
    });
    std::vector<double> sups, fines;
    for (const auto& r : results) {
      if (!r.ok) continue;
      sups.push_back(r.sup_default);
      fines.push_back(r.sup_fine);
    }
    ExperimentRecord rec = base_record("main", cfg, N, opts);
    rec.samples_used = static_cast<int>(sups.size());
    rec.flagged = cfg.samples - rec.samples_used;
    if (sups.size() < 10) throw RuntimeFailure("too many aborted paths at N = " + std::to_string(N));
    rec.error = moment_root(sups, cfg.q);
    rec.error_fine = moment_root(fines, cfg.q);
    auto ci = bootstrap_ci(sups, cfg.q, cfg.ci_level, derived_seed(cfg.seed, kBootstrapTag, static_cast<std::uint64_t>(N)),
                           cfg.bootstrap_resamples);
    rec.ci_low = ci.low;
    rec.ci_high = ci.high;
    if (opts.on_record) opts.on_record(rec);
    out.push_back(rec);
  }
  return out;
}

std::vector<ExperimentRecord> run_clt_study(const RateStudyConfig& cfg, const RunOptions& opts) {
  validate_clt(cfg);
  const int threads = resolve_threads(opts.threads);
  const SpectralField u0 = make_initial_field(cfg.initial, cfg.dim, cfg.M);
  SolverConfig every_step = cfg.solver_config();
  const int stride = every_step.save_every;
  every_step.save_every = 1;
  const auto viscous = dynamics::solve_viscous_leray(u0, cfg.gamma0, cfg.kappa, cfg.dim, every_step);
  SolverConfig solver = cfg.solver_config();
  solver.save_every = fine_stride(stride);
  const std::uint64_t last = solver.num_steps();
  const int n_max = cfg.n_sweep.back();
  const dynamics::ModelParams model{cfg.dim, cfg.gamma0, cfg.kappa};
  const std::size_t ns = cfg.n_sweep.size();
  std::vector<double> eps(ns);
  for (std::size_t in = 0; in < ns; ++in) eps[in] = noise::theta_coeffs(cfg.dim, cfg.gamma, cfg.n_sweep[in]).epsilon();

  // Frame layout of every trajectory saved with the refined stride.
  std::vector<std::uint64_t> frame_steps;
  for (std::uint64_t s = 0; s <= last; ++s) {
    if (s % static_cast<std::uint64_t>(solver.save_every) == 0 || s == last) frame_steps.push_back(s);
  }
  const std::size_t nf = frame_steps.size();
  std::vector<std::vector<double>> errors(ns, std::vector<double>(static_cast<std::size_t>(cfg.samples) * nf, 0.0));
  std::vector<std::vector<char>> ok(ns, std::vector<char>(static_cast<std::size_t>(cfg.samples), 0));
  StepperCache cache(threads, ns);

  parallel_for(static_cast<std::size_t>(cfg.samples), threads, [&](std::size_t s, int worker) {
    const noise::StreamKey key{cfg.seed, s};
    auto source = [&](std::uint64_t step) { return noise::sample_increments(cfg.dim, n_max, cfg.dt, key, step); };
    const auto U = dynamics::solve_clt_limit(viscous, cfg.gamma, cfg.gamma0, cfg.kappa, cfg.dim, solver, source);
    for (std::size_t in = 0; in < ns; ++in) {
      const int N = cfg.n_sweep[in];
      auto& stepper = cache.get(worker, in, [&] {
        return std::make_unique<GalerkinStepper>(model, noise::theta_coeffs(cfg.dim, cfg.gamma, N), solver);
      });
      try {
        auto traj = dynamics::solve_sde(stepper, u0, [&](std::uint64_t step) { return source(step).restricted(N); });
        for (std::size_t f = 0; f < nf; ++f) {
          SpectralField un = dynamics::fluctuation(traj.frames[f], viscous.frames[traj.steps[f]], eps[in]);
          errors[in][s * nf + f] = spectral::sobolev_norm(un - U.frames[f], -cfg.alpha);
        }
        ok[in][s] = 1;
      } catch (const RuntimeFailure&) {
        ok[in][s] = 0;
      }
    }
  });

  std::vector<std::size_t> default_cols;
  for (std::size_t f = 0; f < nf; ++f) {
    if (on_default_grid(frame_steps[f], stride, last)) default_cols.push_back(f);
  }
  std::vector<ExperimentRecord> out;
  for (std::size_t in = 0; in < ns; ++in) {
    const int N = cfg.n_sweep[in];
    std::vector<double> fine, coarse;
    std::size_t used = 0;
    for (std::size_t s = 0; s < static_cast<std::size_t>(cfg.samples); ++s) {
      if (!ok[in][s]) continue;
      ++used;
      for (std::size_t f = 0; f < nf; ++f) fine.push_back(errors[in][s * nf + f]);
      for (std::size_t f : default_cols) coarse.push_back(errors[in][s * nf + f]);
    }
    ExperimentRecord rec = base_record("clt", cfg, N, opts);
    rec.samples_used = static_cast<int>(used);
    rec.flagged = cfg.samples - rec.samples_used;
    if (used < 10) throw RuntimeFailure("too many aborted paths at N = " + std::to_string(N));
    rec.error = sup_moment_root(coarse, used, default_cols.size(), cfg.q);
    rec.error_fine = sup_moment_root(fine, used, nf, cfg.q);
    auto ci = bootstrap_sup_ci(coarse, used, default_cols.size(), cfg.q, cfg.ci_level,
                               derived_seed(cfg.seed, kBootstrapTag, static_cast<std::uint64_t>(N)),
                               cfg.bootstrap_resamples);
    rec.ci_low = ci.low;
    rec.ci_high = ci.high;
    if (opts.on_record) opts.on_record(rec);
    out.push_back(rec);
  }
  return out;
}

GaussianityReport run_clt_gaussianity(const RateStudyConfig& cfg, const RunOptions& opts) {
  validate_clt(cfg);
  const int threads = resolve_threads(opts.threads);
  RateStudyConfig g = cfg;
  g.T = cfg.gaussianity_T;
  SolverConfig solver = g.solver_config();
  solver.save_every = 1;
  const SpectralField u0 = make_initial_field(cfg.initial, cfg.dim, cfg.M);
  const auto viscous = dynamics::solve_viscous_leray(u0, cfg.gamma0, cfg.kappa, cfg.dim, solver);
  SolverConfig final_only = solver;
  final_only.save_every = static_cast<int>(solver.num_steps());
  const spectral::Mode l{{cfg.gaussian_mode[0], cfg.gaussian_mode[1], cfg.gaussian_mode[2]}};
  const std::size_t idx = *u0.lattice().find(l);
  const int n_max = cfg.n_sweep.back();
  std::vector<double> values(static_cast<std::size_t>(cfg.gaussianity_samples));
  parallel_for(values.size(), threads, [&](std::size_t s, int) {
    const noise::StreamKey key{derived_seed(cfg.seed, kGaussTag, 0), s};
    auto U = dynamics::solve_clt_limit(viscous, cfg.gamma, cfg.gamma0, cfg.kappa, cfg.dim, final_only,
                                       [&](std::uint64_t step) {
                                         return noise::sample_increments(cfg.dim, n_max, cfg.dt, key, step);
                                       });
    values[s] = U.frames.back().at(idx)[cfg.gaussian_component].real();
  });
  GaussianityReport rep;
  rep.mode = cfg.gaussian_mode;
  rep.component = cfg.gaussian_component;
  rep.samples = cfg.gaussianity_samples;
  rep.T = cfg.gaussianity_T;
  rep.test = jarque_bera(values);
  rep.pass = rep.test.p_value >= 0.01;
  return rep;
}

RateFit fit_rate(const std::vector<ExperimentRecord>& records) {
  std::vector<double> ln, le, lg;
  RateFit fit;
  for (const auto& r : records) {
    if (!(r.error > 0.0) || !(r.epsilon_N > 0.0) || r.N < 1) {
      ++fit.excluded;
      continue;
    }
    ln.push_back(std::log(static_cast<double>(r.N)));
    lg.push_back(std::log(r.epsilon_N));
    le.push_back(std::log(r.error));
  }
  fit.log_n = fit_line(ln, le);
  fit.log_eps = fit_line(lg, le);
  return fit;
}

void validate_corrector_sweep(const CorrectorSweepConfig& cfg) {
  if (cfg.dim != 2 && cfg.dim != 3) throw ValidationError("dim must be 2 or 3");
  if (!(cfg.gamma > 0.0 && cfg.gamma < 0.5 * cfg.dim)) throw ValidationError("gamma must lie in (0, d/2)");
  if (!(cfg.kappa > 0.0)) throw ValidationError("kappa must be > 0");
  if (cfg.range_factor < 1) throw ValidationError("range_factor must be >= 1");
  if (cfg.alphas.empty() || cfg.n_sweep.empty()) throw ValidationError("alpha list and n_sweep must not be empty");
  for (double a : cfg.alphas) {
    if (!(a >= 0.0 && a <= 1.0)) throw ValidationError("alpha must lie in [0, 1]");
  }
  for (int n : cfg.n_sweep) {
    if (n < 1) throw ValidationError("noise cutoffs N must be >= 1");
  }
}

std::vector<CorrectorRow> run_corrector_sweep(const CorrectorSweepConfig& cfg) {
  validate_corrector_sweep(cfg);
  std::vector<CorrectorRow> rows;
  for (int N : cfg.n_sweep) {
    auto theta = noise::theta_coeffs(cfg.dim, cfg.gamma, N);
    const int range = cfg.range_factor * N;
    auto profile = corrector::corrector_profile(theta, cfg.kappa, range);
    std::optional<corrector::CorrectorProfile> extended;
    if (cfg.check_extension) {
      extended = corrector::corrector_profile(theta, cfg.kappa, (5 * range + 3) / 4);
    }
    for (double a : cfg.alphas) {
      auto rc = corrector::rate_from_profile(profile, a);
      CorrectorRow row;
      row.dim = cfg.dim;
      row.gamma = cfg.gamma;
      row.N = N;
      row.alpha = a;
      row.b = cfg.b;
      row.kappa = cfg.kappa;
      row.epsilon_N = theta.epsilon();
      row.D_N = profile.d_n;
      row.mode_range = range;
      row.op_norm = rc.op_norm;
      row.ratio = rc.ratio;
      row.ratio_extended = extended ? corrector::rate_from_profile(*extended, a).ratio : rc.ratio;
      rows.push_back(row);
    }
  }
  return rows;
}

double ratio_band(const std::vector<CorrectorRow>& rows, double alpha) {
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (const auto& r : rows) {
    if (r.alpha != alpha) continue;
    lo = std::min(lo, r.ratio);
    hi = std::max(hi, r.ratio);
  }
  if (!(hi > 0.0)) throw ValidationError("no rows for the requested alpha");
  return hi / lo;
}

}  // namespace leray::experiments
