#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "leray/lattice.hpp"
#include "leray/spectral_field.hpp"

namespace leray::noise {

using spectral::cplx;
using spectral::LatticePtr;
using spectral::Mode;
using spectral::Vec3;

/// Unit vectors a_{k,i}, i = 1..d-1, spanning the plane orthogonal to k, with
/// a_{k,i} = a_{-k,i}. The noise fields are sigma_{k,i} = a_{k,i} e_k.
class NoiseBasis {
 public:
  NoiseBasis(int dim, int max_mode);

  int dim() const { return lattice_->dim(); }
  int max_mode() const { return lattice_->cutoff(); }
  int per_mode() const { return lattice_->dim() - 1; }
  const spectral::Lattice& lattice() const { return *lattice_; }
  const LatticePtr& lattice_ptr() const { return lattice_; }

  const Vec3& vector(std::size_t mode, int i) const {
    return vectors_[mode * static_cast<std::size_t>(per_mode()) + static_cast<std::size_t>(i)];
  }

 private:
  LatticePtr lattice_;
  std::vector<Vec3> vectors_;
};

NoiseBasis make_noise_basis(int dim, int max_mode);

/// theta_k = sqrt(eps_N) |k|^{-gamma} on 1 <= |k| <= N, normalized so that
/// sum_k theta_k^2 = 1.
class ThetaCoefficients {
 public:
  ThetaCoefficients(int dim, double gamma, int cutoff);

  int dim() const { return dim_; }
  double gamma() const { return gamma_; }
  int cutoff() const { return cutoff_; }
  double epsilon() const { return epsilon_; }
  const LatticePtr& lattice_ptr() const { return lattice_; }

  /// theta for a mode of squared norm norm2 (0 outside the support).
  double value(int norm2) const;
  double value(const Mode& k) const { return value(k.norm2()); }
  /// theta^2 as a function of |k|^2.
  double squared(int norm2) const;

 private:
  int dim_;
  double gamma_;
  int cutoff_;
  double epsilon_;
  LatticePtr lattice_;
  std::vector<double> squared_by_norm2_;
};

/// Validates 0 < gamma < d/2 and N >= 1.
ThetaCoefficients theta_coeffs(int dim, double gamma, int cutoff);

/// (sum_{1 <= |k| <= radius} |k|^{-2 gamma})^{-1} for a real radius >= 1.
double epsilon_for_radius(int dim, double gamma, double radius);

/// D_N = eps_N sum_{1 <= |k| <= N} |k|^{-(2 gamma + 1)}.
double decreasing_factor_DN(const ThetaCoefficients& theta);

/// D_N / eps_N^q for q in (0, min(1, 1/(d - 2 gamma))).
double check_DN_epsilon_bound(const ThetaCoefficients& theta, double q);

/// Position of a random stream: one stream per (master seed, sample), one
/// block per step. Identical keys always reproduce identical draws.
struct StreamKey {
  std::uint64_t seed = 0;
  std::uint64_t sample = 0;
};

/// One time step of the complex Brownian family W^{k,i} on 1 <= |k| <= cutoff.
/// Entries at -k are the conjugates of entries at k.
class BrownianIncrements {
 public:
  BrownianIncrements(LatticePtr lattice, double dt);

  double dt() const { return dt_; }
  int dim() const { return lattice_->dim(); }
  int cutoff() const { return lattice_->cutoff(); }
  const spectral::Lattice& lattice() const { return *lattice_; }

  cplx at(std::size_t mode, int i) const {
    return entries_[mode * static_cast<std::size_t>(dim() - 1) + static_cast<std::size_t>(i)];
  }
  cplx& at(std::size_t mode, int i) {
    return entries_[mode * static_cast<std::size_t>(dim() - 1) + static_cast<std::size_t>(i)];
  }
  std::span<const cplx> entries() const { return entries_; }

  /// The same increments restricted to the smaller ball |k| <= cutoff.
  BrownianIncrements restricted(int cutoff) const;
  /// Combines the increments of consecutive sub-steps into one longer step.
  BrownianIncrements& accumulate(const BrownianIncrements& next);
  BrownianIncrements scaled(double s) const;

 private:
  LatticePtr lattice_;
  double dt_;
  std::vector<cplx> entries_;
};

/// Draws increments for step `step` of the stream `key`. For each canonical
/// k+ and i, two independent N(0, dt) reals g1, g2 give W^{k+,i} = g1 + i g2
/// and W^{-k+,i} = g1 - i g2, so E[W^{k,i} W^{-k,i}] = 2 dt.
///
/// Draw order follows lattice order, so the increments on a smaller ball are
/// a prefix of those on a larger ball for the same key and step.
BrownianIncrements sample_increments(int dim, int cutoff, double dt, const StreamKey& key,
                                     std::uint64_t step);

/// Sum of `substeps` consecutive fine increments of length fine_dt, starting
/// at fine step index first_fine_step. Paths sampled at different resolutions
/// from the same key are therefore coupled.
BrownianIncrements sample_refined_increments(int dim, int cutoff, double fine_dt,
                                             const StreamKey& key, std::uint64_t first_fine_step,
                                             int substeps);

}  // namespace leray::noise
