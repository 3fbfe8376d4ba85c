#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "leray/dynamics.hpp"
#include "leray/statistics.hpp"

namespace leray::experiments {

/// Seeded random divergence-free initial velocity on |k| <= cutoff with
/// |u_k| ~ |k|^{-decay}, rescaled to the given L2 norm (0 gives u0 = 0).
struct InitialCondition {
  int cutoff = 4;
  std::uint64_t seed = 2024;
  double norm = 1.0;
  double decay = 0.0;
};

spectral::SpectralField make_initial_field(const InitialCondition& ic, int dim, int cutoff);

struct RateStudyConfig {
  int dim = 2;
  double gamma = 0.5;
  double gamma0 = 0.6;
  double kappa = 0.02;
  double q = 3.0;
  double alpha = 0.9;  ///< alpha for the main study, alpha0 for the clt study
  std::vector<int> n_sweep{4, 8, 16, 32};
  int M = 48;
  int samples = 64;
  double T = 0.3;
  double dt = 1e-3;
  std::uint64_t seed = 7;
  dynamics::Scheme scheme = dynamics::Scheme::ito_euler;
  dynamics::TransportPath transport = dynamics::TransportPath::fft;
  int save_every = 0;  ///< 0 selects the T/200 default
  InitialCondition initial;
  double ci_level = 0.95;
  int bootstrap_resamples = 2000;
  // Normality check of the fluctuation limit (clt study only).
  int gaussianity_samples = 500;
  double gaussianity_T = 0.04;
  std::vector<int> gaussian_mode{0, 0, 1};
  int gaussian_component = 0;

  int effective_save_every() const;
  dynamics::SolverConfig solver_config() const;
};

RateStudyConfig default_main_config();
RateStudyConfig default_clt_config();

/// Shared checks (dimension, gamma, cutoffs, sample sizes, grid).
void validate_common(const RateStudyConfig& cfg);
/// Parameter box of the scaling-limit rate theorem.
void validate_main(const RateStudyConfig& cfg);
/// Parameter box of the central limit theorem (d = 3 only).
void validate_clt(const RateStudyConfig& cfg);

/// Log-log slope in N of the first (delta -> 0) bound:
/// (2 gamma - d) alpha / 2 when gamma > (d-2)/2, else (2 gamma - d) alpha / d.
double predicted_main_exponent(int dim, double gamma, double alpha);
/// Slope in log N of the q-th moment bound, -q (3 - 2 gamma)/2 (alpha0 - 1/2).
double predicted_clt_moment_exponent(double gamma, double alpha0, double q);
/// Slope of its q-th root, -(3 - 2 gamma)/2 (alpha0 - 1/2).
double predicted_clt_exponent(double gamma, double alpha0);

struct ExperimentRecord {
  std::string study;
  int N = 0;
  double error = 0.0;       ///< e_N at the configured save grid
  double ci_low = 0.0;
  double ci_high = 0.0;
  double error_fine = 0.0;  ///< e_N with the save spacing halved
  double epsilon_N = 0.0;
  double D_N = 0.0;
  int samples_used = 0;
  int flagged = 0;          ///< paths that aborted and were excluded
  std::string config_hash;
  std::uint64_t seed = 0;
};

struct RunOptions {
  int threads = 1;
  std::string config_hash;
  /// Called once per finished N, in sweep order.
  std::function<void(const ExperimentRecord&)> on_record;
};

/// Runs fn(i) for i in [0, count) on `threads` workers. Work is claimed
/// dynamically; callers write results into slot i so order never depends on
/// scheduling. The first exception is rethrown after all workers stop.
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t, int)>& fn);
int resolve_threads(int requested);

/// For each N: `samples` independent paths of the Galerkin SDE with noise
/// cutoff N, error sup_t |u^N_t - u~_t|_{H^{-alpha}} per path, and
/// e_N = (mean sup^q)^{1/q} with a bootstrap interval.
std::vector<ExperimentRecord> run_main_rate_study(const RateStudyConfig& cfg, const RunOptions& opts);

/// One Brownian path per sample on |k| <= max(N_sweep) drives the fluctuation
/// limit U and every u^N (restricted to |k| <= N). Reports
/// e_N = (max_t mean_s |U^N_t - U_t|^q_{H^{-alpha0}})^{1/q}.
std::vector<ExperimentRecord> run_clt_study(const RateStudyConfig& cfg, const RunOptions& opts);

struct GaussianityReport {
  std::vector<int> mode;
  int component = 0;
  int samples = 0;
  double T = 0.0;
  NormalityTest test;
  bool pass = false;  ///< p-value >= 0.01
};
/// Real part of one Fourier coefficient of U_T over independent samples.
GaussianityReport run_clt_gaussianity(const RateStudyConfig& cfg, const RunOptions& opts);

struct RateFit {
  LineFit log_n;    ///< log e_N against log N
  LineFit log_eps;  ///< log e_N against log eps_N
  int excluded = 0; ///< records dropped for nonpositive error
};
/// Fits rates over records with positive error; fewer than 3 usable points
/// is a validation error.
RateFit fit_rate(const std::vector<ExperimentRecord>& records);

/// Corrector rate sweep rows.
struct CorrectorRow {
  int dim = 0;
  double gamma = 0.0;
  int N = 0;
  double alpha = 0.0;
  double b = 0.0;
  double kappa = 0.0;
  double epsilon_N = 0.0;
  double D_N = 0.0;
  int mode_range = 0;
  double op_norm = 0.0;
  double ratio = 0.0;
  double ratio_extended = 0.0;  ///< ratio with the mode range enlarged by 25%
};
struct CorrectorSweepConfig {
  int dim = 3;
  double gamma = 1.2;
  double kappa = 1.0;
  double b = 0.0;
  std::vector<double> alphas{0.0, 0.5, 1.0};
  std::vector<int> n_sweep{4, 8, 16, 32};
  int range_factor = 2;  ///< mode range = range_factor * N
  bool check_extension = true;
};
void validate_corrector_sweep(const CorrectorSweepConfig& cfg);
std::vector<CorrectorRow> run_corrector_sweep(const CorrectorSweepConfig& cfg);
/// max ratio / min ratio over the sweep rows with the given alpha.
double ratio_band(const std::vector<CorrectorRow>& rows, double alpha);

}  // namespace leray::experiments
