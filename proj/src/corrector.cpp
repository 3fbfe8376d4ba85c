#include "leray/corrector.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "leray/error.hpp"

namespace leray::corrector {

using spectral::kPi;
using spectral::Vec3;

double noise_constant(int dim) { return static_cast<double>(dim) / (dim - 1.0); }

double limit_viscosity(int dim) {
  if (dim == 2) return 0.25;
  if (dim == 3) return 0.6;
  throw ValidationError("dimension must be 2 or 3");
}

double bracket_limit(int dim) { return (1.0 - limit_viscosity(dim)) / noise_constant(dim); }

namespace {

void require_dim(int dim) {
  if (dim != 2 && dim != 3) throw ValidationError("dimension must be 2 or 3");
}

// Noise modes in structure-of-arrays form for the frame-sum kernel.
struct NoiseModes {
  std::vector<double> x, y, z, weight, norm2;
};

NoiseModes noise_modes(const noise::ThetaCoefficients& theta) {
  const auto& lat = *theta.lattice_ptr();
  NoiseModes nm;
  const std::size_t n = lat.size();
  nm.x.resize(n);
  nm.y.resize(n);
  nm.z.resize(n);
  nm.weight.resize(n);
  nm.norm2.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Mode& k = lat.mode(i);
    nm.x[i] = k[0];
    nm.y[i] = k[1];
    nm.z[i] = k[2];
    nm.weight[i] = theta.squared(lat.norm2(i));
    nm.norm2[i] = lat.norm2(i);
  }
  return nm;
}

// sum_k theta_k^2 sin^2(k,l), and the symmetric tensor
// sum_k theta_k^2 sin^2(k,l) m m^T / |m|^2 with m = k - l (shifted) or m = k,
// stored as xx, xy, xz, yy, yz, zz.
struct KernelSums {
  double sin_sum = 0.0;
  std::array<double, 6> tensor{};
};

KernelSums kernel_sums(const NoiseModes& nm, const Mode& l, bool shifted, double max_m2) {
  const double lx = l[0], ly = l[1], lz = l[2];
  const double l2 = static_cast<double>(l.norm2());
  const double sx = shifted ? lx : 0.0, sy = shifted ? ly : 0.0, sz = shifted ? lz : 0.0;
  double c = 0.0, txx = 0.0, txy = 0.0, txz = 0.0, tyy = 0.0, tyz = 0.0, tzz = 0.0;
  const std::size_t n = nm.x.size();
  const double* kx = nm.x.data();
  const double* ky = nm.y.data();
  const double* kz = nm.z.data();
  const double* h = nm.weight.data();
  const double* k2 = nm.norm2.data();
#pragma omp simd reduction(+ : c, txx, txy, txz, tyy, tyz, tzz)
  for (std::size_t i = 0; i < n; ++i) {
    const double kl = kx[i] * lx + ky[i] * ly + kz[i] * lz;
    // Integer-exact numerator, so parallel k (including k = l) gives 0.
    const double sin_num = k2[i] * l2 - kl * kl;
    const double mx = kx[i] - sx, my = ky[i] - sy, mz = kz[i] - sz;
    const double m2 = mx * mx + my * my + mz * mz;
    const double keep = m2 <= max_m2 ? 1.0 : 0.0;
    const double w = keep * h[i] * sin_num / (k2[i] * l2);
    const double wm = w / (m2 + (m2 == 0.0 ? 1.0 : 0.0));
    c += w;
    txx += wm * mx * mx;
    txy += wm * mx * my;
    txz += wm * mx * mz;
    tyy += wm * my * my;
    tyz += wm * my * mz;
    tzz += wm * mz * mz;
  }
  return {c, {txx, txy, txz, tyy, tyz, tzz}};
}

double quad(const std::array<double, 6>& t, const Vec3& a, const Vec3& b) {
  return a[0] * (t[0] * b[0] + t[1] * b[1] + t[2] * b[2]) +
         a[1] * (t[1] * b[0] + t[3] * b[1] + t[4] * b[2]) +
         a[2] * (t[2] * b[0] + t[4] * b[1] + t[5] * b[2]);
}

FrameMatrix project_to_frame(const std::array<double, 6>& t, const std::array<Vec3, 2>& frame,
                             int dim) {
  FrameMatrix out{};
  const int p = dim - 1;
  for (int i = 0; i < p; ++i) {
    for (int j = i; j < p; ++j) {
      const double v = quad(t, frame[static_cast<std::size_t>(i)], frame[static_cast<std::size_t>(j)]);
      out[static_cast<std::size_t>(2 * i + j)] = v;
      out[static_cast<std::size_t>(2 * j + i)] = v;
    }
  }
  return out;
}

double no_limit() { return std::numeric_limits<double>::infinity(); }

// Eigenvalues (lo, hi) of a symmetric 2x2 or 1x1 frame matrix.
std::pair<double, double> frame_eigenvalues(const FrameMatrix& m, int dim) {
  if (dim == 2) return {m[0], m[0]};
  const double mean = 0.5 * (m[0] + m[3]);
  const double r = std::hypot(0.5 * (m[0] - m[3]), m[1]);
  return {mean - r, mean + r};
}

}  // namespace

double frame_spectral_norm(const FrameMatrix& m, int dim) {
  auto [lo, hi] = frame_eigenvalues(m, dim);
  return std::max(std::abs(lo), std::abs(hi));
}

double frame_max_eigenvalue(const FrameMatrix& m, int dim) { return frame_eigenvalues(m, dim).second; }

ModeDiagonalOperator::ModeDiagonalOperator(LatticePtr lattice, std::vector<ModeMatrix> matrices)
    : lattice_(std::move(lattice)), matrices_(std::move(matrices)) {
  if (matrices_.size() != lattice_->size()) throw ValidationError("one matrix per mode required");
}

SpectralField ModeDiagonalOperator::apply(const SpectralField& v) const {
  if (v.lattice_ptr() != lattice_) throw ValidationError("field lattice does not match operator");
  SpectralField out(lattice_);
  const int d = v.dim();
  for (std::size_t i = 0; i < lattice_->size(); ++i) {
    const auto& m = matrices_[i];
    auto src = v.at(i);
    auto dst = out.at(i);
    for (int p = 0; p < d; ++p) {
      spectral::cplx acc = 0.0;
      for (int q = 0; q < d; ++q) acc += m[static_cast<std::size_t>(3 * p + q)] * src[q];
      dst[p] = acc;
    }
  }
  return out;
}

CorrectorMultiplier::CorrectorMultiplier(LatticePtr lattice, std::vector<double> diagonal,
                                         std::vector<FrameMatrix> blocks,
                                         std::vector<std::array<Vec3, 2>> frames)
    : lattice_(std::move(lattice)),
      diagonal_(std::move(diagonal)),
      blocks_(std::move(blocks)),
      frames_(std::move(frames)) {}

FrameMatrix CorrectorMultiplier::block(std::size_t mode) const {
  FrameMatrix b = blocks_[mode];
  b[0] += diagonal_[mode];
  b[3] += dim() == 3 ? diagonal_[mode] : 0.0;
  return b;
}

namespace {
ModeMatrix lift(const FrameMatrix& b, const std::array<Vec3, 2>& frame, int dim) {
  ModeMatrix out{};
  const int p = dim - 1;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      double acc = 0.0;
      for (int i = 0; i < p; ++i) {
        for (int j = 0; j < p; ++j) {
          acc += frame[static_cast<std::size_t>(i)][static_cast<std::size_t>(r)] *
                 b[static_cast<std::size_t>(2 * i + j)] *
                 frame[static_cast<std::size_t>(j)][static_cast<std::size_t>(c)];
        }
      }
      out[static_cast<std::size_t>(3 * r + c)] = acc;
    }
  }
  return out;
}

FrameMatrix frame_exponential(const FrameMatrix& b, int dim, double t) {
  FrameMatrix out{};
  if (dim == 2) {
    out[0] = std::exp(t * b[0]);
    return out;
  }
  const double mean = 0.5 * (b[0] + b[3]);
  const double r = std::hypot(0.5 * (b[0] - b[3]), b[1]);
  const double ep = std::exp(t * (mean + r));
  const double em = std::exp(t * (mean - r));
  const double even = 0.5 * (ep + em);
  double odd;
  if (t * r < 1e-8) {
    odd = std::exp(t * mean) * t;
  } else if (t * r < 1.0) {
    odd = std::exp(t * mean) * std::sinh(t * r) / r;
  } else {
    odd = 0.5 * (ep - em) / r;
  }
  out[0] = even + odd * (b[0] - mean);
  out[1] = odd * b[1];
  out[2] = odd * b[2];
  out[3] = even + odd * (b[3] - mean);
  return out;
}
}  // namespace

SpectralField CorrectorMultiplier::apply(const SpectralField& v) const {
  return as_operator().apply(v);
}

ModeDiagonalOperator CorrectorMultiplier::as_operator(double laplacian_shift, double kappa) const {
  std::vector<ModeMatrix> mats(lattice_->size());
  for (std::size_t i = 0; i < lattice_->size(); ++i) {
    FrameMatrix b = block(i);
    const double shift = 4.0 * kPi * kPi * laplacian_shift * kappa * lattice_->norm2(i);
    b[0] += shift;
    if (dim() == 3) b[3] += shift;
    mats[i] = lift(b, frames_[i], dim());
  }
  return ModeDiagonalOperator(lattice_, std::move(mats));
}

ModeDiagonalOperator CorrectorMultiplier::exponential(double t) const {
  std::vector<ModeMatrix> mats(lattice_->size());
  for (std::size_t i = 0; i < lattice_->size(); ++i) {
    mats[i] = lift(frame_exponential(block(i), dim(), t), frames_[i], dim());
  }
  return ModeDiagonalOperator(lattice_, std::move(mats));
}

CorrectorMultiplier corrector_multiplier(const noise::ThetaCoefficients& theta,
                                         const noise::NoiseBasis& basis, double kappa,
                                         int mode_cutoff, std::optional<int> intermediate_cutoff) {
  const int d = theta.dim();
  if (basis.dim() != d) throw ValidationError("noise basis dimension does not match theta");
  if (mode_cutoff < 1) throw ValidationError("mode cutoff must be >= 1");
  if (mode_cutoff > basis.max_mode()) {
    throw ValidationError("requested modes exceed the noise basis range");
  }
  if (kappa < 0.0) throw ValidationError("kappa must be >= 0");
  if (intermediate_cutoff && *intermediate_cutoff < 1) {
    throw ValidationError("intermediate cutoff must be >= 1");
  }
  const double max_m2 = intermediate_cutoff
                            ? static_cast<double>(*intermediate_cutoff) * *intermediate_cutoff
                            : no_limit();
  auto lat = spectral::Lattice::ball(d, mode_cutoff);
  const NoiseModes nm = noise_modes(theta);
  const double cd = noise_constant(d);
  std::vector<double> diag(lat->size());
  std::vector<FrameMatrix> blocks(lat->size());
  std::vector<std::array<Vec3, 2>> frames(lat->size());
  for (std::size_t i = 0; i < lat->size(); ++i) {
    const Mode& l = lat->mode(i);
    // Lattice balls share their prefix, so index i is the same mode in the basis.
    frames[i] = {basis.vector(i, 0), d == 3 ? basis.vector(i, 1) : Vec3{0.0, 0.0, 0.0}};
    // The k-sum is even in l; evaluating one representative keeps M_l = M_{-l} exact.
    if (!lat->canonical(i)) continue;
    KernelSums s = kernel_sums(nm, l, true, max_m2);
    const double scale = 4.0 * kPi * kPi * cd * kappa * lat->norm2(i);
    diag[i] = -scale * s.sin_sum;
    FrameMatrix a = project_to_frame(s.tensor, frames[i], d);
    for (auto& x : a) x *= scale;
    blocks[i] = a;
  }
  for (std::size_t i = 0; i < lat->size(); ++i) {
    if (lat->canonical(i)) continue;
    diag[i] = diag[lat->conjugate(i)];
    blocks[i] = blocks[lat->conjugate(i)];
  }
  return CorrectorMultiplier(lat, std::move(diag), std::move(blocks), std::move(frames));
}

SpectralField corrector_direct(const SpectralField& u, const noise::ThetaCoefficients& theta,
                               const noise::NoiseBasis& basis, double kappa,
                               std::optional<int> intermediate_cutoff) {
  const int d = u.dim();
  if (theta.dim() != d || basis.dim() != d) throw ValidationError("dimension mismatch");
  if (theta.cutoff() > basis.max_mode()) {
    throw ValidationError("noise basis does not cover the noise modes");
  }
  if (!spectral::is_divergence_free(u, 1e-10)) {
    throw ValidationError("corrector input must be divergence-free");
  }
  const int inter = intermediate_cutoff ? *intermediate_cutoff : u.cutoff() + theta.cutoff();
  auto inter_lat = spectral::Lattice::ball(d, inter);
  const auto& klat = *theta.lattice_ptr();
  SpectralField acc(u.lattice_ptr());
  for (std::size_t idx = 0; idx < klat.size(); ++idx) {
    const Mode& k = klat.mode(idx);
    const double w = theta.squared(klat.norm2(idx));
    for (int i = 0; i < d - 1; ++i) {
      const Vec3& a = basis.vector(idx, i);
      SpectralField inner = spectral::leray_project(spectral::transport_by_mode(u, a, -k, inter_lat));
      SpectralField outer = spectral::leray_project(spectral::transport_by_mode(inner, a, k, u.lattice_ptr()));
      acc.axpy(w, outer);
    }
  }
  acc *= noise_constant(d) * kappa;
  return acc;
}

FrameSums frame_sums(const noise::ThetaCoefficients& theta, const Mode& l) {
  const int d = theta.dim();
  if (l.is_zero()) throw ValidationError("mode l must be nonzero");
  const NoiseModes nm = noise_modes(theta);
  auto frame = spectral::frame_vectors(l, d);
  FrameSums out;
  out.shifted = project_to_frame(kernel_sums(nm, l, true, no_limit()).tensor, frame, d);
  out.unshifted = project_to_frame(kernel_sums(nm, l, false, no_limit()).tensor, frame, d);
  return out;
}

FrameMatrix corrector_limit_error(const noise::ThetaCoefficients& theta,
                                  const noise::NoiseBasis& basis, const Mode& l) {
  const int d = theta.dim();
  if (basis.dim() != d) throw ValidationError("dimension mismatch");
  auto idx = basis.lattice().find(l);
  if (!idx) throw ValidationError("mode l outside the noise basis range");
  const NoiseModes nm = noise_modes(theta);
  std::array<Vec3, 2> frame{basis.vector(*idx, 0), d == 3 ? basis.vector(*idx, 1) : Vec3{}};
  FrameMatrix m = project_to_frame(kernel_sums(nm, l, true, no_limit()).tensor, frame, d);
  m[0] -= bracket_limit(d);
  if (d == 3) m[3] -= bracket_limit(d);
  return m;
}

double j_integral(int dim, double gamma, double radius) {
  require_dim(dim);
  // gamma = d/2 is the logarithmic borderline; the finite-radius value is still defined.
  if (!(gamma > 0.0 && gamma <= 0.5 * dim)) throw ValidationError("gamma must lie in (0, d/2]");
  if (radius < 1.0) throw ValidationError("radius must be >= 1");
  const double eps = noise::epsilon_for_radius(dim, gamma, radius);
  const double power = (dim == 3 ? 3.0 : 2.0) - 2.0 * gamma;
  const double integral =
      std::abs(power) < 1e-14 ? std::log(radius) : (std::pow(radius, power) - 1.0) / power;
  const double angular = dim == 3 ? 16.0 * kPi / 15.0 : 3.0 * kPi / 4.0;
  return angular * eps * integral;
}

CorrectorProfile corrector_profile(const noise::ThetaCoefficients& theta, double kappa,
                                   int mode_range, bool full_lattice) {
  const int d = theta.dim();
  if (mode_range < 1) throw ValidationError("mode range must be >= 1");
  if (!(kappa > 0.0)) throw ValidationError("kappa must be > 0");
  const NoiseModes nm = noise_modes(theta);
  const double cd = noise_constant(d);
  const double cp = limit_viscosity(d);
  const int r2max = mode_range * mode_range;
  std::vector<double> best(static_cast<std::size_t>(r2max) + 1, -1.0);
  std::vector<Mode> arg(best.size());

  auto visit = [&](const Mode& l) {
    const int n2 = l.norm2();
    KernelSums s = kernel_sums(nm, l, true, no_limit());
    const double scale = 4.0 * kPi * kPi * kappa * n2;
    FrameMatrix b = project_to_frame(s.tensor, spectral::frame_vectors(l, d), d);
    for (auto& x : b) x *= cd * scale;
    const double diag = scale * (cp - cd * s.sin_sum);
    b[0] += diag;
    if (d == 3) b[3] += diag;
    const double norm = frame_spectral_norm(b, d);
    auto& slot = best[static_cast<std::size_t>(n2)];
    if (norm > slot) {
      slot = norm;
      arg[static_cast<std::size_t>(n2)] = l;
    }
  };

  const int R = mode_range;
  if (full_lattice) {
    const int zr = d == 3 ? R : 0;
    for (int a = -R; a <= R; ++a)
      for (int b = -R; b <= R; ++b)
        for (int c = -zr; c <= zr; ++c) {
          Mode l{{a, b, c}};
          if (!l.is_zero() && l.norm2() <= r2max) visit(l);
        }
  } else if (d == 2) {
    for (int b = 1; b <= R; ++b)
      for (int a = 0; a <= b && a * a + b * b <= r2max; ++a) visit(Mode{{a, b, 0}});
  } else {
    for (int c = 1; c <= R; ++c)
      for (int b = 0; b <= c && b * b + c * c <= r2max; ++b)
        for (int a = 0; a <= b && a * a + b * b + c * c <= r2max; ++a) visit(Mode{{a, b, c}});
  }

  CorrectorProfile out;
  out.dim = d;
  out.mode_range = mode_range;
  out.kappa = kappa;
  out.d_n = noise::decreasing_factor_DN(theta);
  for (std::size_t n2 = 1; n2 < best.size(); ++n2) {
    if (best[n2] < 0.0) continue;
    out.shell_norm2.push_back(static_cast<int>(n2));
    out.shell_max_norm.push_back(best[n2]);
    out.shell_argmax.push_back(arg[n2]);
  }
  return out;
}

RateCheck rate_from_profile(const CorrectorProfile& profile, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ValidationError("alpha must lie in [0, 1]");
  RateCheck out;
  for (std::size_t s = 0; s < profile.shell_norm2.size(); ++s) {
    const double weight = std::pow(4.0 * kPi * kPi * profile.shell_norm2[s], -0.5 * (2.0 + alpha));
    const double v = weight * profile.shell_max_norm[s];
    if (v > out.op_norm) {
      out.op_norm = v;
      out.argmax = profile.shell_argmax[s];
    }
  }
  out.ratio = out.op_norm / (profile.kappa * std::pow(profile.d_n, alpha));
  return out;
}

RateCheck verify_corrector_rate(const noise::ThetaCoefficients& theta, double kappa, double b,
                                double alpha, int mode_range) {
  if (!std::isfinite(b)) throw ValidationError("Sobolev index b must be finite");
  return rate_from_profile(corrector_profile(theta, kappa, mode_range), alpha);
}

}  // namespace leray::corrector
