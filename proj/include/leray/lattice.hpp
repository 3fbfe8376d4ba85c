#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

namespace leray::spectral {

/// Integer wave vector. Unused trailing components are zero in 2D.
struct Mode {
  std::array<int, 3> c{0, 0, 0};

  int norm2() const { return c[0] * c[0] + c[1] * c[1] + c[2] * c[2]; }
  Mode operator-() const { return Mode{{-c[0], -c[1], -c[2]}}; }
  Mode operator+(const Mode& o) const {
    return Mode{{c[0] + o.c[0], c[1] + o.c[1], c[2] + o.c[2]}};
  }
  Mode operator-(const Mode& o) const {
    return Mode{{c[0] - o.c[0], c[1] - o.c[1], c[2] - o.c[2]}};
  }
  int operator[](int i) const { return c[static_cast<std::size_t>(i)]; }
  bool is_zero() const { return c[0] == 0 && c[1] == 0 && c[2] == 0; }
  friend bool operator==(const Mode&, const Mode&) = default;
};

int dot(const Mode& a, const Mode& b);

/// True when the first nonzero component is positive. Exactly one of k, -k
/// is canonical for k != 0.
bool is_canonical(const Mode& k);

/// Nonzero lattice points in the Euclidean ball 1 <= |k| <= cutoff.
///
/// Modes are ordered by |k|^2 and then lexicographically, so the ball of a
/// smaller cutoff is always a prefix of a larger one. Instances are shared and
/// immutable; obtain them through ball().
class Lattice {
 public:
  static std::shared_ptr<const Lattice> ball(int dim, int cutoff);

  int dim() const { return dim_; }
  int cutoff() const { return cutoff_; }
  std::size_t size() const { return modes_.size(); }

  const Mode& mode(std::size_t i) const { return modes_[i]; }
  std::span<const Mode> modes() const { return modes_; }
  int norm2(std::size_t i) const { return norm2_[i]; }

  /// Index of -k for the mode at index i.
  std::size_t conjugate(std::size_t i) const { return conj_[i]; }
  bool canonical(std::size_t i) const { return canonical_[i] != 0; }
  /// Indices of the canonical half-lattice representatives, in lattice order.
  std::span<const std::size_t> canonical_indices() const { return canonical_list_; }

  std::optional<std::size_t> find(const Mode& k) const;
  bool contains(const Mode& k) const { return k.norm2() <= cutoff_ * cutoff_ && !k.is_zero(); }

  /// Number of modes with |k|^2 <= r2.
  std::size_t prefix_size(int r2) const;

  /// Distinct values of |k|^2 present, ascending, and the start offset of each shell.
  std::span<const int> shell_norm2() const { return shell_norm2_; }
  std::span<const std::size_t> shell_offsets() const { return shell_offsets_; }

  Lattice(int dim, int cutoff);

 private:
  std::size_t box_index(const Mode& k) const;

  int dim_;
  int cutoff_;
  std::vector<Mode> modes_;
  std::vector<int> norm2_;
  std::vector<std::size_t> conj_;
  std::vector<std::uint8_t> canonical_;
  std::vector<std::size_t> canonical_list_;
  std::vector<int> shell_norm2_;
  std::vector<std::size_t> shell_offsets_;
  std::vector<std::int32_t> box_;
};

using LatticePtr = std::shared_ptr<const Lattice>;

}  // namespace leray::spectral
