#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "leray/corrector.hpp"
#include "leray/fft_transform.hpp"
#include "leray/noise_model.hpp"
#include "leray/spectral_field.hpp"

namespace leray::dynamics {

using spectral::SpectralField;

enum class Scheme { ito_euler, stratonovich_midpoint };
std::string scheme_name(Scheme s);
Scheme parse_scheme(const std::string& name);

enum class TransportPath { fft, direct };

struct SolverConfig {
  double dt = 1e-3;
  double T = 0.1;
  Scheme scheme = Scheme::ito_euler;
  int cutoff = 16;        ///< Galerkin cutoff M
  int save_every = 1;     ///< steps between saved frames
  double energy_tolerance = 0.05;
  TransportPath transport = TransportPath::fft;
  double midpoint_tol = 1e-12;
  int midpoint_max_iter = 50;

  /// Number of steps; T must be a multiple of dt up to rounding.
  std::size_t num_steps() const;
  void validate() const;
};

/// Save stride giving a spacing close to T / 200.
int default_save_every(double T, double dt);

struct ModelParams {
  int dim = 2;
  double gamma0 = 0.6;
  double kappa = 1.0;
};

/// Evaluates Pi_M(v.grad u) through the configured path.
class Transport {
 public:
  Transport(int dim, int cutoff, TransportPath path);
  SpectralField operator()(const SpectralField& v, const SpectralField& u);
  int cutoff() const { return cutoff_; }

 private:
  int cutoff_;
  TransportPath path_;
  std::unique_ptr<spectral::FftTransport> fft_;
};

/// Pi(v.grad u) truncated to |k| <= cutoff through the direct convolution.
SpectralField transport_term(const SpectralField& v, const SpectralField& u, int cutoff);

/// b_M(u) = Pi_M((K u).grad u).
SpectralField galerkin_drift_b(const SpectralField& u, double gamma0, int cutoff);

/// G_M^{k,i}(u) = Pi_M(sigma_{k,i}.grad u) for the mode with index k_index in
/// the basis lattice. Complex valued for a single k; the pair k, -k is real.
SpectralField galerkin_diffusion_G(const SpectralField& u, std::size_t k_index, int i,
                                   const noise::NoiseBasis& basis, int cutoff);

/// Real divergence-free field sqrt(C_d kappa) sum_{k,i} c_k a_{k,i} dW^{k,i} e_k
/// with c_k = theta_k (or |k|^{-gamma} for the fluctuation equation).
SpectralField noise_velocity(const noise::BrownianIncrements& dw, const noise::NoiseBasis& basis,
                             const std::function<double(int)>& coefficient, double kappa);

struct GalerkinState {
  SpectralField u;
  double t = 0.0;
  std::uint64_t step = 0;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<std::uint64_t> steps;
  std::vector<SpectralField> frames;
  double max_energy_ratio = 1.0;  ///< max over all steps of |u_t| / |u_0|
  std::vector<double> dissipation;  ///< running c kappa sum dt |grad u|^2 (viscous solver)
};

using IncrementSource = std::function<noise::BrownianIncrements(std::uint64_t step)>;

/// Galerkin SDE on |k| <= M with noise modes |k| <= N:
///   du = [-b_M(u) + S_M(u)] dt + sqrt(C_d kappa) sum theta_k G_M^{k,i}(u) dW^{k,i}.
///
/// ito_euler is an exponential Euler scheme for the Ito form: the corrector
/// S_M (the Ito correction of the truncated system, which only keeps
/// intermediate modes |l - k| <= M) is integrated exactly per mode,
///   u_{n+1} = exp(dt S_M) (u_n - dt b_M(u_n) + Pi_M(w_n.grad u_n)).
/// stratonovich_midpoint solves
///   u_{n+1} = u_n - dt b_M(m) + Pi_M(w_n.grad m),  m = (u_n + u_{n+1}) / 2
/// by fixed-point iteration and conserves |u| up to the iteration tolerance.
/// Without noise (kappa = 0 or no theta) both reduce to the inviscid schemes.
class GalerkinStepper {
 public:
  GalerkinStepper(const ModelParams& model, std::optional<noise::ThetaCoefficients> theta,
                  const SolverConfig& cfg);

  const SolverConfig& config() const { return cfg_; }
  const ModelParams& model() const { return model_; }
  int noise_cutoff() const { return theta_ ? theta_->cutoff() : 0; }
  bool has_noise() const { return theta_.has_value() && model_.kappa > 0.0; }

  GalerkinState step(const GalerkinState& state, const noise::BrownianIncrements& dw);
  /// Noise-free explicit Euler, u - dt b_M(u).
  SpectralField inviscid_euler_step(const SpectralField& u);

 private:
  SpectralField ito_step(const SpectralField& u, const SpectralField* w);
  SpectralField midpoint_step(const SpectralField& u, const SpectralField* w);

  ModelParams model_;
  std::optional<noise::ThetaCoefficients> theta_;
  SolverConfig cfg_;
  std::optional<noise::NoiseBasis> basis_;
  std::optional<corrector::ModeDiagonalOperator> propagator_;
  Transport transport_;
};

GalerkinState step_sde(GalerkinStepper& stepper, const GalerkinState& state,
                       const noise::BrownianIncrements& dw);

/// Runs the stepper from u0 over cfg.num_steps() steps, saving every
/// cfg.save_every steps and the final state.
Trajectory solve_sde(GalerkinStepper& stepper, const SpectralField& u0, const IncrementSource& source);

/// d u/dt + Pi((K u).grad u) = C'_d kappa Delta u by exponential Euler
///   u_{n+1} = P_dt(u_n - dt b_M(u_n)),  P_dt = exp(C'_d kappa dt Delta).
/// Aborts if |u_t| exceeds 2 |u_0|. The dissipation record uses c = C'_d.
Trajectory solve_viscous_leray(const SpectralField& u0, double gamma0, double kappa, int dim,
                               const SolverConfig& cfg);

/// Linear fluctuation equation
///   dU + Pi(K(U).grad u~ + (K u~).grad U) dt = C'_d kappa Delta U dt
///        + sqrt(C_d kappa) sum |k|^{-gamma} Pi(sigma_{k,i}.grad u~) dW^{k,i},  U_0 = 0,
/// by exponential Euler. The viscous trajectory must hold every step. The
/// noise runs over the modes of the supplied increments.
Trajectory solve_clt_limit(const Trajectory& viscous, double gamma, double gamma0, double kappa,
                           int dim, const SolverConfig& cfg, const IncrementSource& source);

/// (uN - u~) / sqrt(eps_N).
SpectralField fluctuation(const SpectralField& uN, const SpectralField& u_tilde, double eps_N);

}  // namespace leray::dynamics
