#include "leray/lattice.hpp"

#include <algorithm>
#include <map>
#include <mutex>
#include <string>

#include "leray/error.hpp"

namespace leray::spectral {

int dot(const Mode& a, const Mode& b) {
  return a.c[0] * b.c[0] + a.c[1] * b.c[1] + a.c[2] * b.c[2];
}

bool is_canonical(const Mode& k) {
  for (int v : k.c) {
    if (v != 0) return v > 0;
  }
  return false;
}

Lattice::Lattice(int dim, int cutoff) : dim_(dim), cutoff_(cutoff) {
  if (dim != 2 && dim != 3) throw ValidationError("dimension must be 2 or 3");
  if (cutoff < 1) throw ValidationError("lattice cutoff must be >= 1");

  const int r2max = cutoff * cutoff;
  const int zmax = dim == 3 ? cutoff : 0;
  for (int a = -cutoff; a <= cutoff; ++a) {
    for (int b = -cutoff; b <= cutoff; ++b) {
      for (int c = -zmax; c <= zmax; ++c) {
        Mode k{{a, b, c}};
        int n2 = k.norm2();
        if (n2 == 0 || n2 > r2max) continue;
        modes_.push_back(k);
      }
    }
  }
  std::sort(modes_.begin(), modes_.end(), [](const Mode& x, const Mode& y) {
    int nx = x.norm2(), ny = y.norm2();
    if (nx != ny) return nx < ny;
    return x.c < y.c;
  });

  const std::size_t side = 2 * static_cast<std::size_t>(cutoff) + 1;
  box_.assign(dim == 3 ? side * side * side : side * side, -1);
  norm2_.resize(modes_.size());
  canonical_.resize(modes_.size());
  for (std::size_t i = 0; i < modes_.size(); ++i) {
    box_[box_index(modes_[i])] = static_cast<std::int32_t>(i);
    norm2_[i] = modes_[i].norm2();
    canonical_[i] = is_canonical(modes_[i]) ? 1 : 0;
    if (canonical_[i]) canonical_list_.push_back(i);
    if (shell_norm2_.empty() || shell_norm2_.back() != norm2_[i]) {
      shell_norm2_.push_back(norm2_[i]);
      shell_offsets_.push_back(i);
    }
  }
  shell_offsets_.push_back(modes_.size());
  conj_.resize(modes_.size());
  for (std::size_t i = 0; i < modes_.size(); ++i) {
    conj_[i] = static_cast<std::size_t>(box_[box_index(-modes_[i])]);
  }
}

std::size_t Lattice::box_index(const Mode& k) const {
  const std::size_t side = 2 * static_cast<std::size_t>(cutoff_) + 1;
  auto off = [&](int v) { return static_cast<std::size_t>(v + cutoff_); };
  std::size_t idx = off(k.c[0]) * side + off(k.c[1]);
  if (dim_ == 3) idx = idx * side + off(k.c[2]);
  return idx;
}

std::optional<std::size_t> Lattice::find(const Mode& k) const {
  if (!contains(k)) return std::nullopt;
  if (dim_ == 2 && k.c[2] != 0) return std::nullopt;
  std::int32_t v = box_[box_index(k)];
  if (v < 0) return std::nullopt;
  return static_cast<std::size_t>(v);
}

std::size_t Lattice::prefix_size(int r2) const {
  auto it = std::upper_bound(norm2_.begin(), norm2_.end(), r2);
  return static_cast<std::size_t>(it - norm2_.begin());
}

std::shared_ptr<const Lattice> Lattice::ball(int dim, int cutoff) {
  static std::mutex mutex;
  static std::map<std::pair<int, int>, std::shared_ptr<const Lattice>> cache;
  std::lock_guard lock(mutex);
  auto key = std::make_pair(dim, cutoff);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  auto lat = std::make_shared<const Lattice>(dim, cutoff);
  cache.emplace(key, lat);
  return lat;
}

}  // namespace leray::spectral
