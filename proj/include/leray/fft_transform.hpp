#pragma once

#include <memory>

#include "leray/spectral_field.hpp"

namespace leray::spectral {

/// Smallest grid size n > 3*cutoff of the form 2^a 3^b 5^c with n even, so
/// that quadratic products of fields on |k| <= cutoff are alias free on the
/// retained modes.
int dealiased_grid_size(int cutoff);

/// Pseudo-spectral evaluation of v.grad u on a dealiased grid.
///
/// Each instance owns its plans and buffers and must be used by one thread at
/// a time; construct one per worker. Plans use FFTW_ESTIMATE, so results do
/// not depend on timing.
class FftTransport {
 public:
  FftTransport(int dim, int cutoff);
  ~FftTransport();
  FftTransport(const FftTransport&) = delete;
  FftTransport& operator=(const FftTransport&) = delete;

  int dim() const { return dim_; }
  int cutoff() const { return cutoff_; }
  int grid_size() const { return n_; }

  /// (v.grad u) on the ball |k| <= out_cutoff, without projection. Input
  /// cutoffs and out_cutoff must not exceed cutoff().
  SpectralField advect(const SpectralField& v, const SpectralField& u, int out_cutoff);

 private:
  struct Impl;
  int dim_;
  int cutoff_;
  int n_;
  std::unique_ptr<Impl> impl_;
};

/// Direct convolution (v.grad u)_k = sum_j (v_j . 2 pi i (k - j)) u_{k-j} on
/// |k| <= out_cutoff, without projection. Reference path.
SpectralField advect_direct(const SpectralField& v, const SpectralField& u, int out_cutoff);

}  // namespace leray::spectral
