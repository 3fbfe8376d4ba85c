#include "leray/spectral_field.hpp"

#include <algorithm>
#include <cmath>

#include "leray/error.hpp"

namespace leray::spectral {

SpectralField::SpectralField(LatticePtr lattice)
    : lattice_(std::move(lattice)),
      coeffs_(lattice_->size() * static_cast<std::size_t>(lattice_->dim())) {}

SpectralField SpectralField::zero(int dim, int cutoff) {
  return SpectralField(Lattice::ball(dim, cutoff));
}

void SpectralField::set_pair(std::size_t mode, std::span<const cplx> value) {
  auto u = at(mode);
  auto w = at(lattice_->conjugate(mode));
  for (int c = 0; c < dim(); ++c) {
    u[c] = value[c];
    w[c] = std::conj(value[c]);
  }
}

namespace {
void require_same_lattice(const SpectralField& a, const SpectralField& b) {
  if (a.lattice_ptr() != b.lattice_ptr()) {
    throw ValidationError("field lattices differ (dim/cutoff mismatch)");
  }
}
}  // namespace

SpectralField& SpectralField::operator+=(const SpectralField& o) {
  require_same_lattice(*this, o);
  for (std::size_t i = 0; i < coeffs_.size(); ++i) coeffs_[i] += o.coeffs_[i];
  return *this;
}

SpectralField& SpectralField::operator-=(const SpectralField& o) {
  require_same_lattice(*this, o);
  for (std::size_t i = 0; i < coeffs_.size(); ++i) coeffs_[i] -= o.coeffs_[i];
  return *this;
}

SpectralField& SpectralField::operator*=(double s) {
  for (auto& c : coeffs_) c *= s;
  return *this;
}

SpectralField& SpectralField::axpy(double s, const SpectralField& o) {
  require_same_lattice(*this, o);
  for (std::size_t i = 0; i < coeffs_.size(); ++i) coeffs_[i] += s * o.coeffs_[i];
  return *this;
}

SpectralField operator+(SpectralField a, const SpectralField& b) { return a += b; }
SpectralField operator-(SpectralField a, const SpectralField& b) { return a -= b; }
SpectralField operator*(double s, SpectralField a) { return a *= s; }

double sobolev_norm(const SpectralField& u, double s) {
  const auto& lat = u.lattice();
  const int d = u.dim();
  double total = 0.0;
  // Weights are constant on shells.
  auto norm2 = lat.shell_norm2();
  auto off = lat.shell_offsets();
  for (std::size_t sh = 0; sh < norm2.size(); ++sh) {
    double shell_sum = 0.0;
    for (std::size_t i = off[sh]; i < off[sh + 1]; ++i) {
      auto c = u.at(i);
      for (int p = 0; p < d; ++p) shell_sum += std::norm(c[p]);
    }
    if (shell_sum == 0.0) continue;
    double weight = s == 0.0 ? 1.0 : std::pow(kTwoPi * kTwoPi * norm2[sh], s);
    total += weight * shell_sum;
  }
  return std::sqrt(total);
}

cplx inner(const SpectralField& u, const SpectralField& v) {
  require_same_lattice(u, v);
  cplx total = 0.0;
  auto a = u.coeffs();
  auto b = v.coeffs();
  for (std::size_t i = 0; i < a.size(); ++i) total += a[i] * std::conj(b[i]);
  return total;
}

namespace {
// Replaces each coefficient by its gradient-direction part (complement) or the
// remainder (projection).
SpectralField split_projection(const SpectralField& x, bool complement) {
  SpectralField out(x.lattice_ptr());
  const auto& lat = x.lattice();
  const int d = x.dim();
  for (std::size_t i = 0; i < lat.size(); ++i) {
    const Mode& k = lat.mode(i);
    auto src = x.at(i);
    auto dst = out.at(i);
    cplx kdotu = 0.0;
    for (int p = 0; p < d; ++p) kdotu += static_cast<double>(k[p]) * src[p];
    cplx factor = kdotu / static_cast<double>(lat.norm2(i));
    for (int p = 0; p < d; ++p) {
      cplx grad = factor * static_cast<double>(k[p]);
      dst[p] = complement ? grad : src[p] - grad;
    }
  }
  return out;
}
}  // namespace

SpectralField leray_project(const SpectralField& x) { return split_projection(x, false); }
SpectralField leray_complement(const SpectralField& x) { return split_projection(x, true); }

double smoothing_factor(int norm2, double gamma0) {
  return 1.0 / (1.0 + std::pow(kTwoPi * kTwoPi * norm2, gamma0));
}

SpectralField smoothing_K(const SpectralField& u, double gamma0) {
  if (!(gamma0 > 0.0)) throw ValidationError("smoothing exponent gamma0 must be > 0");
  SpectralField out = u;
  const auto& lat = u.lattice();
  auto norm2 = lat.shell_norm2();
  auto off = lat.shell_offsets();
  for (std::size_t sh = 0; sh < norm2.size(); ++sh) {
    double f = smoothing_factor(norm2[sh], gamma0);
    for (std::size_t i = off[sh]; i < off[sh + 1]; ++i) {
      for (auto& c : out.at(i)) c *= f;
    }
  }
  return out;
}

SpectralField heat_semigroup(const SpectralField& u, double t, double mu) {
  if (t < 0.0) throw ValidationError("heat semigroup time must be >= 0");
  if (!(mu > 0.0)) throw ValidationError("heat semigroup diffusivity must be > 0");
  if (t == 0.0) return u;
  SpectralField out = u;
  const auto& lat = u.lattice();
  auto norm2 = lat.shell_norm2();
  auto off = lat.shell_offsets();
  for (std::size_t sh = 0; sh < norm2.size(); ++sh) {
    double f = std::exp(-4.0 * kPi * kPi * norm2[sh] * mu * t);
    for (std::size_t i = off[sh]; i < off[sh + 1]; ++i) {
      for (auto& c : out.at(i)) c *= f;
    }
  }
  return out;
}

SpectralField change_cutoff(const SpectralField& u, int cutoff) {
  SpectralField out = SpectralField::zero(u.dim(), cutoff);
  // Lattice order is a prefix order, so the common modes are a common prefix.
  const std::size_t n = std::min(u.num_modes(), out.num_modes());
  const std::size_t len = n * static_cast<std::size_t>(u.dim());
  std::copy_n(u.coeffs().begin(), len, out.coeffs().begin());
  return out;
}

SpectralField transport_by_mode(const SpectralField& u, const Vec3& a, const Mode& k,
                                const LatticePtr& target) {
  SpectralField out(target);
  const auto& lat = u.lattice();
  const int d = u.dim();
  for (std::size_t i = 0; i < lat.size(); ++i) {
    const Mode& l = lat.mode(i);
    auto j = target->find(l + k);
    if (!j) continue;
    double a_dot_l = 0.0;
    for (int p = 0; p < d; ++p) a_dot_l += a[p] * l[p];
    if (a_dot_l == 0.0) continue;
    cplx factor(0.0, kTwoPi * a_dot_l);
    auto src = u.at(i);
    auto dst = out.at(*j);
    for (int p = 0; p < d; ++p) dst[p] += factor * src[p];
  }
  return out;
}

double reality_defect(const SpectralField& u) {
  const auto& lat = u.lattice();
  double worst = 0.0;
  for (std::size_t i = 0; i < lat.size(); ++i) {
    auto a = u.at(i);
    auto b = u.at(lat.conjugate(i));
    for (int p = 0; p < u.dim(); ++p) worst = std::max(worst, std::abs(std::conj(a[p]) - b[p]));
  }
  return worst;
}

double divergence_defect(const SpectralField& u) {
  const auto& lat = u.lattice();
  double worst = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < lat.size(); ++i) {
    const Mode& k = lat.mode(i);
    auto c = u.at(i);
    cplx kdotu = 0.0;
    double mag = 0.0;
    for (int p = 0; p < u.dim(); ++p) {
      kdotu += static_cast<double>(k[p]) * c[p];
      mag += std::norm(c[p]);
    }
    scale = std::max(scale, std::sqrt(mag));
    worst = std::max(worst, std::abs(kdotu) / std::sqrt(static_cast<double>(lat.norm2(i))));
  }
  return scale == 0.0 ? 0.0 : worst / scale;
}

bool is_divergence_free(const SpectralField& u, double rel_tol) {
  return divergence_defect(u) <= rel_tol;
}

double max_abs_diff(const SpectralField& u, const SpectralField& v) {
  require_same_lattice(u, v);
  double worst = 0.0;
  auto a = u.coeffs();
  auto b = v.coeffs();
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

bool approx_equal(const SpectralField& u, const SpectralField& v, double rel_tol,
                  double abs_floor_fraction) {
  require_same_lattice(u, v);
  auto a = u.coeffs();
  auto b = v.coeffs();
  double scale = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    scale = std::max({scale, std::abs(a[i]), std::abs(b[i])});
  }
  const double floor = abs_floor_fraction * scale;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double ref = std::max({std::abs(a[i]), std::abs(b[i]), floor});
    if (std::abs(a[i] - b[i]) > rel_tol * ref) return false;
  }
  return true;
}

SpectralField random_field(const LatticePtr& lattice, std::mt19937_64& rng, double decay,
                           bool divergence_free, int support) {
  SpectralField out(lattice);
  std::normal_distribution<double> normal(0.0, 1.0);
  const int d = lattice->dim();
  const int support2 = support > 0 ? support * support : lattice->cutoff() * lattice->cutoff();
  for (std::size_t i : lattice->canonical_indices()) {
    if (lattice->norm2(i) > support2) continue;
    const Mode& k = lattice->mode(i);
    double amp = std::pow(static_cast<double>(lattice->norm2(i)), -0.5 * decay);
    std::array<cplx, 3> c{};
    for (int p = 0; p < d; ++p) c[p] = amp * cplx(normal(rng), normal(rng));
    if (divergence_free) {
      cplx kdotu = 0.0;
      for (int p = 0; p < d; ++p) kdotu += static_cast<double>(k[p]) * c[p];
      for (int p = 0; p < d; ++p) c[p] -= kdotu / static_cast<double>(lattice->norm2(i)) * static_cast<double>(k[p]);
    }
    out.set_pair(i, std::span<const cplx>(c.data(), static_cast<std::size_t>(d)));
  }
  return out;
}

SpectralField single_pair(int dim, int cutoff, const Mode& k, std::span<const cplx> value) {
  SpectralField out = SpectralField::zero(dim, cutoff);
  auto idx = out.lattice().find(k);
  if (!idx) throw ValidationError("mode outside the field lattice");
  out.set_pair(*idx, value);
  return out;
}

namespace {
Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}
Vec3 normalized(const Vec3& a) {
  double n = std::sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2]);
  return {a[0] / n, a[1] / n, a[2] / n};
}
}  // namespace

std::array<Vec3, 2> frame_vectors(const Mode& k, int dim) {
  if (k.is_zero()) throw ValidationError("frame undefined for the zero mode");
  Mode kp = is_canonical(k) ? k : -k;
  Vec3 kv{static_cast<double>(kp[0]), static_cast<double>(kp[1]), static_cast<double>(kp[2])};
  if (dim == 2) {
    Vec3 a = normalized(Vec3{-kv[1], kv[0], 0.0});
    return {a, Vec3{0.0, 0.0, 0.0}};
  }
  Vec3 e{1.0, 0.0, 0.0};
  if (kp[1] == 0 && kp[2] == 0) e = Vec3{0.0, 1.0, 0.0};
  Vec3 a1 = normalized(cross(kv, e));
  Vec3 a2 = normalized(cross(kv, a1));
  return {a1, a2};
}

}  // namespace leray::spectral
