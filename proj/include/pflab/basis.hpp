// basis.hpp — finite mode sets and truncated occupation-number bases
#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace pflab::fock {

// Thrown when a requested truncation would exceed the configured dimension cap.
struct dimension_cap_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Mode {
  double omega = 0.0;     // dispersion sample; signed only in glued (doubled) sets
  double weight = 0.0;    // quadrature weight, dimensionless
  int reservoir = 0;      // which bath the mode belongs to
};

struct ModeSet {
  std::vector<Mode> modes;

  std::size_t size() const { return modes.size(); }
  double omega(std::size_t j) const { return modes.at(j).omega; }
  double weight(std::size_t j) const { return modes.at(j).weight; }
  int reservoir(std::size_t j) const { return modes.at(j).reservoir; }

  // Frequencies must be nonzero and strictly increasing within each reservoir;
  // positivity is demanded where sampling needs it, not here, so that signed
  // (glued) mode sets can reuse the same carrier.
  void validate() const {
    if (modes.empty()) throw std::invalid_argument("ModeSet: mode count must be >= 1");
    for (std::size_t j = 0; j < modes.size(); ++j) {
      if (!(modes[j].weight > 0.0))
        throw std::invalid_argument("ModeSet: weights must be positive");
      if (modes[j].omega == 0.0)
        throw std::invalid_argument("ModeSet: frequencies must be nonzero");
      if (modes[j].reservoir < 0)
        throw std::invalid_argument("ModeSet: reservoir tags must be nonnegative");
      for (std::size_t i = 0; i < j; ++i)
        if (modes[i].reservoir == modes[j].reservoir && !(modes[i].omega < modes[j].omega))
          throw std::invalid_argument(
              "ModeSet: frequencies must be strictly increasing within a reservoir");
    }
  }

  bool all_positive() const {
    return std::all_of(modes.begin(), modes.end(), [](const Mode& m) { return m.omega > 0.0; });
  }
};

namespace detail {
inline void hash_mix(std::uint64_t& h, std::uint64_t v) {
  h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
}
inline std::uint64_t bits_of(double x) {
  std::uint64_t u;
  static_assert(sizeof(u) == sizeof(x));
  std::memcpy(&u, &x, sizeof(u));
  return u;
}
}  // namespace detail

// Truncated bosonic occupation basis: tuples nu with sum(nu) <= n_total_max and
// nu_j <= per_mode_cap, enumerated lexicographically.
struct OccBasis {
  ModeSet modes;
  int n_total_max = 0;
  int per_mode_cap = 0;
  std::vector<std::vector<int>> states;  // lexicographic, duplicate-free
  std::string id;

  std::size_t mode_count() const { return modes.size(); }
  std::size_t dim() const { return states.size(); }

  int total(std::size_t i) const {
    int t = 0;
    for (int n : states.at(i)) t += n;
    return t;
  }

  // Ordinal of a tuple, or -1 when it lies outside the truncation.
  std::ptrdiff_t index_of(const std::vector<int>& tuple) const {
    const auto it = std::lower_bound(states.begin(), states.end(), tuple);
    if (it == states.end() || *it != tuple) return -1;
    return it - states.begin();
  }
};

inline OccBasis build_basis(const ModeSet& modes, int n_total_max, int per_mode_cap,
                            std::size_t hard_cap = 200000) {
  modes.validate();
  if (n_total_max < 0 || per_mode_cap < 0)
    throw std::invalid_argument("build_basis: truncation caps must be nonnegative");
  OccBasis basis;
  basis.modes = modes;
  basis.n_total_max = n_total_max;
  basis.per_mode_cap = per_mode_cap;
  const std::size_t m = modes.size();
  std::vector<int> cur(m, 0);
  const std::function<void(std::size_t, int)> emit = [&](std::size_t j, int remaining) {
    if (j == m) {
      if (basis.states.size() >= hard_cap)
        throw dimension_cap_error("build_basis: truncation too large (dimension above hard cap)");
      basis.states.push_back(cur);
      return;
    }
    const int top = std::min(per_mode_cap, remaining);
    for (int n = 0; n <= top; ++n) {
      cur[j] = n;
      emit(j + 1, remaining - n);
    }
    cur[j] = 0;
  };
  emit(0, n_total_max);

  std::uint64_t h = 0xcbf29ce484222325ULL;
  detail::hash_mix(h, static_cast<std::uint64_t>(m));
  detail::hash_mix(h, static_cast<std::uint64_t>(n_total_max));
  detail::hash_mix(h, static_cast<std::uint64_t>(per_mode_cap));
  for (const Mode& mo : modes.modes) {
    detail::hash_mix(h, detail::bits_of(mo.omega));
    detail::hash_mix(h, detail::bits_of(mo.weight));
    detail::hash_mix(h, static_cast<std::uint64_t>(mo.reservoir));
  }
  char buf[64];
  std::snprintf(buf, sizeof(buf), "occ[m=%zu;n=%d;c=%d;%016llx]", m, n_total_max, per_mode_cap,
                static_cast<unsigned long long>(h));
  basis.id = buf;
  return basis;
}

}  // namespace pflab::fock
