// conjugate.hpp — dilation-type conjugate operators on sampled radial grids
#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include "pflab/basis.hpp"
#include "pflab/linalg.hpp"

namespace pflab::conjugate {

// Variant selects the radial symbol m(w) of the generator
//   A = (i/2) (m(w) d/dw + d/dw m(w)).
enum class Variant {
  translations,   // m == 1
  regularized_n,  // m(w) = |w| / sqrt(w^2 + 1/n)
  m_delta,        // smooth interpolation with plateaus near 0 and infinity
};

struct ConjugateSpec {
  double delta0{0.5};     // inner plateau edge, must lie in (0, 1]
  double delta_inf{4.0};  // outer plateau edge, must lie in [1, inf)
  double mu{0.1};         // infrared regularity margin, must be positive
  Variant variant{Variant::translations};
  double regulator_n{1.0};  // only read by regularized_n; must be positive

  void validate() const {
    if (!(delta0 > 0.0) || !(delta0 <= 1.0))
      throw std::invalid_argument("ConjugateSpec: delta0 must lie in (0, 1]");
    if (!(delta_inf >= 1.0))
      throw std::invalid_argument("ConjugateSpec: delta_inf must lie in [1, inf)");
    if (!(mu > 0.0))
      throw std::invalid_argument("ConjugateSpec: mu must be positive");
    if (variant == Variant::regularized_n && !(regulator_n > 0.0))
      throw std::invalid_argument("ConjugateSpec: regulator_n must be positive");
  }
};

// Smooth even cutoff: 1 on |x| <= 1/2, 0 on |x| >= 1, C-infinity,
// non-increasing on x >= 0.
inline double aux_chi(double x) {
  const double t = 2.0 * std::abs(x) - 1.0;  // ramp coordinate on [0, 1]
  if (t <= 0.0) return 1.0;
  if (t >= 1.0) return 0.0;
  const double a = std::exp(-1.0 / t);
  const double b = std::exp(-1.0 / (1.0 - t));
  return b / (a + b);
}

// Weight d(w) >= 1 on w > 0: grows like w^{-mu/4} at the origin and like
// w^{mu/4} at infinity, equals 1 at w = 1.
inline double aux_d(double omega, double mu) {
  if (!(omega > 0.0))
    throw std::invalid_argument("aux_d: omega must be positive");
  if (!(mu > 0.0)) throw std::invalid_argument("aux_d: mu must be positive");
  const double chi1 = aux_chi(omega);
  const double chi2 = aux_chi(omega / 2.0);
  return chi1 * std::pow(omega, -mu / 4.0) + (chi2 - chi1) +
         (1.0 - chi2) * std::pow(omega, mu / 4.0);
}

// Bounded symbol m_delta(w) >= 1: equals d(delta0) for |w| <= delta0/2,
// follows d(|w|) in the bulk, and equals d(delta_inf) for |w| >= 4 delta_inf.
// Even in w, so it is directly usable on signed (doubled) frequency grids.
inline double aux_m_delta(double omega, const ConjugateSpec& spec) {
  spec.validate();
  const double w = std::abs(omega);
  const double lo = aux_chi(w / spec.delta0);
  const double hi = aux_chi(w / (2.0 * spec.delta_inf));
  const double bulk = (w > 0.0) ? aux_d(w, spec.mu) : 0.0;  // weight is 0 anyway at w = 0
  return aux_d(spec.delta0, spec.mu) * lo + bulk * (hi - lo) +
         aux_d(spec.delta_inf, spec.mu) * (1.0 - hi);
}

inline double symbol_value(double omega, const ConjugateSpec& spec) {
  switch (spec.variant) {
    case Variant::translations:
      return 1.0;
    case Variant::regularized_n:
      return std::abs(omega) /
             std::sqrt(omega * omega + 1.0 / spec.regulator_n);
    case Variant::m_delta:
      return aux_m_delta(omega, spec);
  }
  throw std::logic_error("symbol_value: unknown variant");
}

// Antisymmetric first-difference matrix on the sampled frequencies.  Interior
// rows are central differences; boundary rows keep the same two-point span by
// mirroring the missing neighbour, so uniform grids yield entries +-1/(2h)
// throughout.  The result is exactly antisymmetric as stored.
inline RealMatrix difference_matrix(const fock::ModeSet& modes) {
  const int n = static_cast<int>(modes.size());
  RealMatrix d = RealMatrix::Zero(n, n);
  if (n < 2) return d;
  auto node = [&](int j) { return modes.omega(static_cast<std::size_t>(j)); };
  for (int j = 0; j < n; ++j) {
    const double left = (j > 0) ? node(j - 1) : 2.0 * node(j) - node(j + 1);
    const double right =
        (j + 1 < n) ? node(j + 1) : 2.0 * node(j) - node(j - 1);
    const double span = right - left;
    if (!(span > 0.0))
      throw std::invalid_argument("difference_matrix: nodes must increase");
    if (j + 1 < n) d(j, j + 1) += 1.0 / span;
    if (j > 0) d(j, j - 1) -= 1.0 / span;
  }
  // Exact antisymmetrization: build the upper triangle once and mirror.
  for (int r = 0; r < n; ++r)
    for (int c = r + 1; c < n; ++c) {
      const double v = 0.5 * (d(r, c) - d(c, r));
      d(r, c) = v;
      d(c, r) = -v;
    }
  return d;
}

// Discretized generator A = (i/2)(M D + D M) with M = diag m(w_j).  Exactly
// Hermitian as stored.  Grids with fewer than two nodes cannot support a
// difference quotient; the zero matrix is returned for them.
inline Matrix conjugate_a(const fock::ModeSet& modes, const ConjugateSpec& spec) {
  spec.validate();
  const int n = static_cast<int>(modes.size());
  Matrix a = Matrix::Zero(n, n);
  if (n < 2) return a;
  const RealMatrix d = difference_matrix(modes);
  RealVector m(n);
  for (int j = 0; j < n; ++j)
    m(j) = symbol_value(modes.omega(static_cast<std::size_t>(j)), spec);
  const cplx half_i{0.0, 0.5};
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c)
      if (d(r, c) != 0.0) a(r, c) = half_i * (m(r) + m(c)) * d(r, c);
  return a;
}

}  // namespace pflab::conjugate
