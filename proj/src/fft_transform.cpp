#include "leray/fft_transform.hpp"

#include <fftw3.h>

#include <algorithm>
#include <mutex>
#include <vector>

#include "leray/error.hpp"

namespace leray::spectral {

namespace {
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

bool smooth(int n) {
  for (int p : {2, 3, 5})
    while (n % p == 0) n /= p;
  return n == 1;
}

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};
}  // namespace

int dealiased_grid_size(int cutoff) {
  if (cutoff < 1) throw ValidationError("cutoff must be >= 1");
  int n = 3 * cutoff + 1;
  while (n % 2 != 0 || !smooth(n)) ++n;
  return n;
}

struct FftTransport::Impl {
  int dim = 0;
  int n = 0;
  std::size_t real_size = 0;
  std::size_t complex_size = 0;
  int half = 0;  // length of the last complex axis
  std::unique_ptr<fftw_complex, FftwFree> spec;
  std::vector<std::unique_ptr<double, FftwFree>> phys;  // v_q (d), grad u (d*d), product
  fftw_plan backward = nullptr;
  fftw_plan forward = nullptr;

  std::size_t complex_index(const Mode& k) const {
    auto wrap = [this](int c) { return static_cast<std::size_t>(c < 0 ? c + n : c); };
    if (dim == 2) return wrap(k[0]) * static_cast<std::size_t>(half) + static_cast<std::size_t>(k[1]);
    return (wrap(k[0]) * static_cast<std::size_t>(n) + wrap(k[1])) * static_cast<std::size_t>(half) +
           static_cast<std::size_t>(k[2]);
  }

  int last(const Mode& k) const { return k[dim - 1]; }

  // Loads component p of the field (times 2 pi i k_q when q >= 0) into spec
  // and transforms to physical space.
  void to_physical(const SpectralField& f, int p, int q, double* out) {
    std::fill_n(reinterpret_cast<double*>(spec.get()), 2 * complex_size, 0.0);
    const auto& lat = f.lattice();
    for (std::size_t i = 0; i < lat.size(); ++i) {
      const Mode& k = lat.mode(i);
      if (last(k) < 0) continue;
      cplx c = f.at(i)[p];
      if (q >= 0) c *= cplx(0.0, kTwoPi * k[q]);
      auto* dst = spec.get() + complex_index(k);
      (*dst)[0] = c.real();
      (*dst)[1] = c.imag();
    }
    fftw_execute_dft_c2r(backward, spec.get(), out);
  }
};

FftTransport::FftTransport(int dim, int cutoff)
    : dim_(dim), cutoff_(cutoff), n_(dealiased_grid_size(cutoff)), impl_(std::make_unique<Impl>()) {
  if (dim != 2 && dim != 3) throw ValidationError("dimension must be 2 or 3");
  auto& im = *impl_;
  im.dim = dim;
  im.n = n_;
  im.half = n_ / 2 + 1;
  im.real_size = dim == 2 ? static_cast<std::size_t>(n_) * n_ : static_cast<std::size_t>(n_) * n_ * n_;
  im.complex_size = im.real_size / static_cast<std::size_t>(n_) * static_cast<std::size_t>(im.half);
  im.spec.reset(fftw_alloc_complex(im.complex_size));
  const int nphys = dim + dim * dim + 1;
  for (int i = 0; i < nphys; ++i) im.phys.emplace_back(fftw_alloc_real(im.real_size));
  std::lock_guard<std::mutex> lock(planner_mutex());
  if (dim == 2) {
    im.backward = fftw_plan_dft_c2r_2d(n_, n_, im.spec.get(), im.phys[0].get(), FFTW_ESTIMATE);
    im.forward = fftw_plan_dft_r2c_2d(n_, n_, im.phys[0].get(), im.spec.get(), FFTW_ESTIMATE);
  } else {
    im.backward = fftw_plan_dft_c2r_3d(n_, n_, n_, im.spec.get(), im.phys[0].get(), FFTW_ESTIMATE);
    im.forward = fftw_plan_dft_r2c_3d(n_, n_, n_, im.phys[0].get(), im.spec.get(), FFTW_ESTIMATE);
  }
  if (!im.backward || !im.forward) throw RuntimeFailure("FFTW planning failed");
}

FftTransport::~FftTransport() {
  std::lock_guard<std::mutex> lock(planner_mutex());
  if (impl_->backward) fftw_destroy_plan(impl_->backward);
  if (impl_->forward) fftw_destroy_plan(impl_->forward);
}

SpectralField FftTransport::advect(const SpectralField& v, const SpectralField& u, int out_cutoff) {
  if (v.dim() != dim_ || u.dim() != dim_) throw ValidationError("dimension mismatch");
  if (v.cutoff() > cutoff_ || u.cutoff() > cutoff_ || out_cutoff > cutoff_) {
    throw ValidationError("field cutoff exceeds the transform cutoff");
  }
  auto& im = *impl_;
  const int d = dim_;
  for (int q = 0; q < d; ++q) im.to_physical(v, q, -1, im.phys[static_cast<std::size_t>(q)].get());
  SpectralField out = SpectralField::zero(d, out_cutoff);
  const auto& lat = out.lattice();
  const double norm = 1.0 / static_cast<double>(im.real_size);
  double* prod = im.phys.back().get();
  for (int p = 0; p < d; ++p) {
    for (int q = 0; q < d; ++q) {
      im.to_physical(u, p, q, im.phys[static_cast<std::size_t>(d + q)].get());
    }
    std::fill_n(prod, im.real_size, 0.0);
    for (int q = 0; q < d; ++q) {
      const double* vq = im.phys[static_cast<std::size_t>(q)].get();
      const double* g = im.phys[static_cast<std::size_t>(d + q)].get();
      for (std::size_t x = 0; x < im.real_size; ++x) prod[x] += vq[x] * g[x];
    }
    fftw_execute_dft_r2c(im.forward, prod, im.spec.get());
    for (std::size_t i = 0; i < lat.size(); ++i) {
      const Mode& k = lat.mode(i);
      const bool flip = im.last(k) < 0;
      const auto& c = im.spec.get()[im.complex_index(flip ? -k : k)];
      cplx val(c[0] * norm, c[1] * norm);
      out.at(i)[p] = flip ? std::conj(val) : val;
    }
  }
  return out;
}

SpectralField advect_direct(const SpectralField& v, const SpectralField& u, int out_cutoff) {
  if (v.dim() != u.dim()) throw ValidationError("dimension mismatch");
  const int d = u.dim();
  SpectralField out = SpectralField::zero(d, out_cutoff);
  const auto& olat = out.lattice();
  const auto& vlat = v.lattice();
  const auto& ulat = u.lattice();
  for (std::size_t j = 0; j < vlat.size(); ++j) {
    auto vj = v.at(j);
    const Mode& mj = vlat.mode(j);
    for (std::size_t m = 0; m < ulat.size(); ++m) {
      auto target = olat.find(mj + ulat.mode(m));
      if (!target) continue;
      const Mode& km = ulat.mode(m);
      cplx dir = 0.0;
      for (int q = 0; q < d; ++q) dir += vj[q] * cplx(0.0, kTwoPi * km[q]);
      auto um = u.at(m);
      auto dst = out.at(*target);
      for (int p = 0; p < d; ++p) dst[p] += dir * um[p];
    }
  }
  return out;
}

}  // namespace leray::spectral
