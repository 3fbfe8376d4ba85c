#pragma once

#include <array>
#include <optional>
#include <vector>

#include "leray/noise_model.hpp"
#include "leray/spectral_field.hpp"

namespace leray::corrector {

using spectral::LatticePtr;
using spectral::Mode;
using spectral::SpectralField;

/// C_d = d/(d-1), the noise normalization.
double noise_constant(int dim);
/// C'_d: 1/4 in 2D, 3/5 in 3D. S_{theta^N} -> C'_d kappa Delta.
double limit_viscosity(int dim);
/// Limit of the bracketed frame sum: 3/8 in 2D, 4/15 in 3D.
double bracket_limit(int dim);

/// Small dense (d-1)x(d-1) symmetric matrix, row-major, unused entries zero.
using FrameMatrix = std::array<double, 4>;

/// Real d x d matrix acting on each Fourier coefficient, row-major.
using ModeMatrix = std::array<double, 9>;

/// A linear operator that acts independently on each Fourier mode.
class ModeDiagonalOperator {
 public:
  ModeDiagonalOperator(LatticePtr lattice, std::vector<ModeMatrix> matrices);

  const spectral::Lattice& lattice() const { return *lattice_; }
  const ModeMatrix& matrix(std::size_t mode) const { return matrices_[mode]; }
  SpectralField apply(const SpectralField& v) const;

 private:
  LatticePtr lattice_;
  std::vector<ModeMatrix> matrices_;
};

/// Closed-form Fourier multiplier of the Stratonovich-Ito corrector.
///
/// For divergence-free v with frame coordinates v_{l,j} = a_{l,j} . v_l the
/// corrector acts as S(v)_l = sum_i [c_l delta_ij + M_l(i,j)] v_{l,j} a_{l,i} with
///   c_l     = -4 pi^2 C_d kappa |l|^2 sum_k theta_k^2 sin^2(k,l)
///   M_l(ij) =  4 pi^2 C_d kappa |l|^2 sum_k theta_k^2 sin^2(k,l)
///              (a_{l,i}.(k-l)) (a_{l,j}.(k-l)) / |k-l|^2.
/// Without an intermediate cutoff sum_k theta_k^2 sin^2(k,l) = (d-1)/d exactly
/// (cubic symmetry of the lattice ball), so c_l = -4 pi^2 kappa |l|^2 is the
/// kappa Delta part and -M_l is the projected part. With an intermediate
/// cutoff the k-sum only keeps |l-k| <= cutoff, which is the Ito correction
/// of the Galerkin system truncated at that cutoff.
class CorrectorMultiplier {
 public:
  CorrectorMultiplier(LatticePtr lattice, std::vector<double> diagonal,
                      std::vector<FrameMatrix> blocks, std::vector<std::array<spectral::Vec3, 2>> frames);

  int dim() const { return lattice_->dim(); }
  const spectral::Lattice& lattice() const { return *lattice_; }
  const LatticePtr& lattice_ptr() const { return lattice_; }

  double diagonal(std::size_t mode) const { return diagonal_[mode]; }
  const FrameMatrix& projected_part(std::size_t mode) const { return blocks_[mode]; }
  const std::array<spectral::Vec3, 2>& frame(std::size_t mode) const { return frames_[mode]; }
  /// c_l Id + M_l in frame coordinates.
  FrameMatrix block(std::size_t mode) const;

  /// S(v) for v on the same lattice.
  SpectralField apply(const SpectralField& v) const;
  /// S(v) - shift * kappa Delta v, i.e. the blocks with c_l + 4 pi^2 shift kappa |l|^2.
  ModeDiagonalOperator as_operator(double laplacian_shift = 0.0, double kappa = 0.0) const;
  /// exp(t S) per mode.
  ModeDiagonalOperator exponential(double t) const;

 private:
  LatticePtr lattice_;
  std::vector<double> diagonal_;
  std::vector<FrameMatrix> blocks_;
  std::vector<std::array<spectral::Vec3, 2>> frames_;
};

/// Builds the multiplier on the ball |l| <= mode_cutoff. The frames are taken
/// from the basis, which must cover the ball.
CorrectorMultiplier corrector_multiplier(const noise::ThetaCoefficients& theta,
                                         const noise::NoiseBasis& basis, double kappa,
                                         int mode_cutoff,
                                         std::optional<int> intermediate_cutoff = std::nullopt);

/// Literal double transport sum
///   C_d kappa sum_{k,i} theta_k^2 Pi[ sigma_{k,i}.grad Pi( sigma_{-k,i}.grad u ) ].
/// Intermediate modes live on a ball large enough to hold every shift unless an
/// intermediate cutoff is given (the Galerkin form). Requires divergence-free u.
SpectralField corrector_direct(const SpectralField& u, const noise::ThetaCoefficients& theta,
                               const noise::NoiseBasis& basis, double kappa,
                               std::optional<int> intermediate_cutoff = std::nullopt);

/// The two frame sums compared in the shift lemma, for mode l:
///   shifted(ij)   = sum_k theta_k^2 sin^2(k,l) (a_i.(k-l))(a_j.(k-l))/|k-l|^2
///   unshifted(ij) = sum_k theta_k^2 sin^2(k,l) (a_i.k)(a_j.k)/|k|^2
struct FrameSums {
  FrameMatrix shifted{};
  FrameMatrix unshifted{};
};
FrameSums frame_sums(const noise::ThetaCoefficients& theta, const Mode& l);

/// shifted(ij) - bracket_limit(d) delta_ij.
FrameMatrix corrector_limit_error(const noise::ThetaCoefficients& theta,
                                  const noise::NoiseBasis& basis, const Mode& l);

/// eps_N times the angular integral of the unshifted sum over 1 <= |x| <= N:
/// 3D (16 pi/15) eps_N int_1^N r^{2-2 gamma} dr, 2D (3 pi/4) eps_N int_1^N r^{1-2 gamma} dr.
/// N may be real; eps_N is the lattice sum over the ball of that radius.
double j_integral(int dim, double gamma, double radius);

/// Spectral norm of a symmetric frame matrix of size (d-1).
double frame_spectral_norm(const FrameMatrix& m, int dim);
/// Largest eigenvalue of a symmetric frame matrix of size (d-1).
double frame_max_eigenvalue(const FrameMatrix& m, int dim);

/// Per-shell maxima of || block_l of (S - C'_d kappa Delta) ||_2 over
/// 1 <= |l| <= mode_range. The block norm is invariant under signed coordinate
/// permutations, so only one representative per orbit is evaluated unless
/// full_lattice is set.
struct CorrectorProfile {
  int dim = 0;
  int mode_range = 0;
  double kappa = 0.0;
  double d_n = 0.0;
  std::vector<int> shell_norm2;
  std::vector<double> shell_max_norm;
  std::vector<Mode> shell_argmax;
};
CorrectorProfile corrector_profile(const noise::ThetaCoefficients& theta, double kappa,
                                   int mode_range, bool full_lattice = false);

struct RateCheck {
  double op_norm = 0.0;  ///< H^b -> H^{b-2-alpha} norm of S - C'_d kappa Delta on the range
  double ratio = 0.0;    ///< op_norm / (kappa D_N^alpha)
  Mode argmax{};
};
/// Evaluates the operator norm from a profile; b cancels because the operator
/// is block-diagonal, so it only enters through validation.
RateCheck rate_from_profile(const CorrectorProfile& profile, double alpha);

RateCheck verify_corrector_rate(const noise::ThetaCoefficients& theta, double kappa, double b,
                                double alpha, int mode_range);

}  // namespace leray::corrector
