#include "leray/noise_model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "leray/error.hpp"

namespace leray::noise {

NoiseBasis::NoiseBasis(int dim, int max_mode) : lattice_(spectral::Lattice::ball(dim, max_mode)) {
  const int per = dim - 1;
  vectors_.resize(lattice_->size() * static_cast<std::size_t>(per));
  for (std::size_t i = 0; i < lattice_->size(); ++i) {
    auto frame = spectral::frame_vectors(lattice_->mode(i), dim);
    for (int j = 0; j < per; ++j) vectors_[i * static_cast<std::size_t>(per) + static_cast<std::size_t>(j)] = frame[static_cast<std::size_t>(j)];
  }
}

NoiseBasis make_noise_basis(int dim, int max_mode) {
  if (dim != 2 && dim != 3) throw ValidationError("dimension must be 2 or 3");
  if (max_mode < 1) throw ValidationError("noise basis max_mode must be >= 1");
  return NoiseBasis(dim, max_mode);
}

double epsilon_for_radius(int dim, double gamma, double radius) {
  if (radius < 1.0) throw ValidationError("noise cutoff must be >= 1");
  const int cut = static_cast<int>(std::floor(radius));
  auto lat = spectral::Lattice::ball(dim, cut);
  const double r2 = radius * radius;
  double sum = 0.0;
  auto norm2 = lat->shell_norm2();
  auto off = lat->shell_offsets();
  for (std::size_t sh = 0; sh < norm2.size(); ++sh) {
    if (norm2[sh] > r2) break;
    double count = static_cast<double>(off[sh + 1] - off[sh]);
    sum += count * std::pow(static_cast<double>(norm2[sh]), -gamma);
  }
  return 1.0 / sum;
}

ThetaCoefficients::ThetaCoefficients(int dim, double gamma, int cutoff)
    : dim_(dim), gamma_(gamma), cutoff_(cutoff), lattice_(spectral::Lattice::ball(dim, cutoff)) {
  epsilon_ = epsilon_for_radius(dim, gamma, cutoff);
  squared_by_norm2_.assign(static_cast<std::size_t>(cutoff) * static_cast<std::size_t>(cutoff) + 1, 0.0);
  for (int n2 : lattice_->shell_norm2()) {
    squared_by_norm2_[static_cast<std::size_t>(n2)] = epsilon_ * std::pow(static_cast<double>(n2), -gamma);
  }
}

double ThetaCoefficients::squared(int norm2) const {
  if (norm2 <= 0 || static_cast<std::size_t>(norm2) >= squared_by_norm2_.size()) return 0.0;
  return squared_by_norm2_[static_cast<std::size_t>(norm2)];
}

double ThetaCoefficients::value(int norm2) const { return std::sqrt(squared(norm2)); }

ThetaCoefficients theta_coeffs(int dim, double gamma, int cutoff) {
  if (dim != 2 && dim != 3) throw ValidationError("dimension must be 2 or 3");
  if (!(gamma > 0.0 && gamma < 0.5 * dim)) {
    throw ValidationError("gamma must lie in (0, d/2)");
  }
  if (cutoff < 1) throw ValidationError("noise cutoff N must be >= 1");
  return ThetaCoefficients(dim, gamma, cutoff);
}

double decreasing_factor_DN(const ThetaCoefficients& theta) {
  const auto& lat = *theta.lattice_ptr();
  auto norm2 = lat.shell_norm2();
  auto off = lat.shell_offsets();
  double sum = 0.0;
  for (std::size_t sh = 0; sh < norm2.size(); ++sh) {
    double count = static_cast<double>(off[sh + 1] - off[sh]);
    sum += count * std::pow(static_cast<double>(norm2[sh]), -(theta.gamma() + 0.5));
  }
  return theta.epsilon() * sum;
}

double check_DN_epsilon_bound(const ThetaCoefficients& theta, double q) {
  const double upper = std::min(1.0, 1.0 / (theta.dim() - 2.0 * theta.gamma()));
  if (!(q > 0.0 && q < upper)) {
    throw ValidationError("q must lie in (0, min(1, 1/(d-2*gamma)))");
  }
  return decreasing_factor_DN(theta) / std::pow(theta.epsilon(), q);
}

BrownianIncrements::BrownianIncrements(LatticePtr lattice, double dt)
    : lattice_(std::move(lattice)),
      dt_(dt),
      entries_(lattice_->size() * static_cast<std::size_t>(lattice_->dim() - 1)) {}

BrownianIncrements BrownianIncrements::restricted(int cutoff) const {
  if (cutoff > this->cutoff()) throw ValidationError("cannot restrict increments to a larger ball");
  BrownianIncrements out(spectral::Lattice::ball(dim(), cutoff), dt_);
  std::copy_n(entries_.begin(), out.entries_.size(), out.entries_.begin());
  return out;
}

BrownianIncrements& BrownianIncrements::accumulate(const BrownianIncrements& next) {
  if (next.lattice_ != lattice_) throw ValidationError("increment lattices differ");
  for (std::size_t i = 0; i < entries_.size(); ++i) entries_[i] += next.entries_[i];
  dt_ += next.dt_;
  return *this;
}

BrownianIncrements BrownianIncrements::scaled(double s) const {
  BrownianIncrements out = *this;
  for (auto& e : out.entries_) e *= s;
  return out;
}

namespace {
std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t stream_seed(const StreamKey& key, std::uint64_t step) {
  std::uint64_t h = splitmix64(key.seed);
  h = splitmix64(h ^ key.sample);
  return splitmix64(h ^ step);
}
}  // namespace

BrownianIncrements sample_increments(int dim, int cutoff, double dt, const StreamKey& key,
                                     std::uint64_t step) {
  if (!(dt > 0.0)) throw ValidationError("increment time step dt must be > 0");
  auto lat = spectral::Lattice::ball(dim, cutoff);
  BrownianIncrements out(lat, dt);
  std::mt19937_64 engine(stream_seed(key, step));
  std::normal_distribution<double> normal(0.0, std::sqrt(dt));
  for (std::size_t idx : lat->canonical_indices()) {
    const std::size_t neg = lat->conjugate(idx);
    for (int i = 0; i < dim - 1; ++i) {
      double g1 = normal(engine);
      double g2 = normal(engine);
      out.at(idx, i) = cplx(g1, g2);
      out.at(neg, i) = cplx(g1, -g2);
    }
  }
  return out;
}

BrownianIncrements sample_refined_increments(int dim, int cutoff, double fine_dt,
                                             const StreamKey& key, std::uint64_t first_fine_step,
                                             int substeps) {
  if (substeps < 1) throw ValidationError("substeps must be >= 1");
  BrownianIncrements total = sample_increments(dim, cutoff, fine_dt, key, first_fine_step);
  for (int j = 1; j < substeps; ++j) {
    total.accumulate(sample_increments(dim, cutoff, fine_dt, key, first_fine_step + static_cast<std::uint64_t>(j)));
  }
  return total;
}

}  // namespace leray::noise
