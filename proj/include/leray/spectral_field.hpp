#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "leray/lattice.hpp"

namespace leray::spectral {

using cplx = std::complex<double>;
using Vec3 = std::array<double, 3>;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

/// Fourier representation of a zero-mean vector field on the torus,
/// u(x) = sum_k u_k e^{2 pi i k.x}, stored on the lattice ball 1 <= |k| <= M.
///
/// Both k and -k are stored; reality (conj(u_k) = u_{-k}) is an invariant
/// maintained by every operation in this library rather than an implicit
/// half-lattice convention. Coefficients are laid out mode-major, d
/// components per mode.
class SpectralField {
 public:
  explicit SpectralField(LatticePtr lattice);
  static SpectralField zero(int dim, int cutoff);

  int dim() const { return lattice_->dim(); }
  int cutoff() const { return lattice_->cutoff(); }
  std::size_t num_modes() const { return lattice_->size(); }
  const Lattice& lattice() const { return *lattice_; }
  const LatticePtr& lattice_ptr() const { return lattice_; }

  std::span<const cplx> coeffs() const { return coeffs_; }
  std::span<cplx> coeffs() { return coeffs_; }

  std::span<const cplx> at(std::size_t mode) const {
    return {coeffs_.data() + mode * static_cast<std::size_t>(dim()), static_cast<std::size_t>(dim())};
  }
  std::span<cplx> at(std::size_t mode) {
    return {coeffs_.data() + mode * static_cast<std::size_t>(dim()), static_cast<std::size_t>(dim())};
  }

  /// Sets u_k = value and u_{-k} = conj(value).
  void set_pair(std::size_t mode, std::span<const cplx> value);

  SpectralField& operator+=(const SpectralField& o);
  SpectralField& operator-=(const SpectralField& o);
  SpectralField& operator*=(double s);
  /// this += s * o
  SpectralField& axpy(double s, const SpectralField& o);

 private:
  LatticePtr lattice_;
  std::vector<cplx> coeffs_;
};

SpectralField operator+(SpectralField a, const SpectralField& b);
SpectralField operator-(SpectralField a, const SpectralField& b);
SpectralField operator*(double s, SpectralField a);

/// sqrt( sum_k (2 pi |k|)^{2s} |u_k|^2 ), exact on the stored modes.
double sobolev_norm(const SpectralField& u, double s);
inline double l2_norm(const SpectralField& u) { return sobolev_norm(u, 0.0); }

/// <u, v> = sum_k u_k . conj(v_k); real for real fields up to rounding.
cplx inner(const SpectralField& u, const SpectralField& v);

/// Helmholtz-Leray projection: u_k - (k.u_k / |k|^2) k.
SpectralField leray_project(const SpectralField& x);
/// Gradient part: (k.u_k / |k|^2) k.
SpectralField leray_complement(const SpectralField& x);

/// Leray-alpha smoothing (1 + (-Delta)^{gamma0})^{-1}; requires gamma0 > 0.
SpectralField smoothing_K(const SpectralField& u, double gamma0);
/// Per-mode factor 1 / (1 + (2 pi |k|)^{2 gamma0}).
double smoothing_factor(int norm2, double gamma0);

/// e^{mu t Delta} with Delta e_k = -4 pi^2 |k|^2 e_k. Requires t >= 0, mu > 0.
SpectralField heat_semigroup(const SpectralField& u, double t, double mu);

/// Copy onto the lattice of another cutoff: modes outside the target ball are
/// dropped, missing modes are zero.
SpectralField change_cutoff(const SpectralField& u, int cutoff);

/// Transport by the single-mode field a e_k, without projection:
/// result_{l+k} = (a . 2 pi i l) u_l for every l whose shifted mode lies in the
/// target lattice. Not reality preserving on its own (a e_k is complex).
SpectralField transport_by_mode(const SpectralField& u, const Vec3& a, const Mode& k,
                                const LatticePtr& target);

/// max_k |conj(u_k) - u_{-k}|
double reality_defect(const SpectralField& u);
/// max_k |k.u_k| / |k|, relative to max_k |u_k| (0 for the zero field).
/// Measured against the field scale since projection of a nearly
/// longitudinal roundoff coefficient leaves a tiny, poorly aligned remainder.
double divergence_defect(const SpectralField& u);
bool is_divergence_free(const SpectralField& u, double rel_tol = 1e-12);

/// Per-mode comparison: |u_k - v_k| <= rel_tol * max(|u_k|, |v_k|, floor) where
/// floor = abs_floor_fraction * max_k max(|u_k|, |v_k|).
bool approx_equal(const SpectralField& u, const SpectralField& v, double rel_tol = 1e-12,
                  double abs_floor_fraction = 1e-3);
double max_abs_diff(const SpectralField& u, const SpectralField& v);

/// Random real field with |u_k| ~ |k|^{-decay} on modes |k| <= support (all
/// modes when support <= 0). Divergence-free when requested.
SpectralField random_field(const LatticePtr& lattice, std::mt19937_64& rng, double decay,
                           bool divergence_free, int support = 0);

/// Field supported on the pair {k, -k}: u_k = value, u_{-k} = conj(value).
SpectralField single_pair(int dim, int cutoff, const Mode& k, std::span<const cplx> value);

/// Orthonormal basis a_{k,1..d-1} of the plane orthogonal to k, identical for
/// k and -k. In 3D: a_1 = normalize(k+ x e) with e the first standard basis
/// vector not parallel to the canonical representative k+, a_2 = normalize(k+ x a_1).
std::array<Vec3, 2> frame_vectors(const Mode& k, int dim);

}  // namespace leray::spectral
