// coupling.hpp — sampled form factors: radial grids, regularity audits,
// weighted norms, thermal doubling, and glued signed-frequency variants
#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "pflab/basis.hpp"
#include "pflab/conjugate.hpp"
#include "pflab/linalg.hpp"

namespace pflab::coupling {

inline constexpr double kPi = 3.14159265358979323846;

// Finite-level system the field couples to.  Energies are stored ascending;
// ties are allowed (degenerate levels).
struct SmallSystem {
  RealVector energies;

  int nu() const { return static_cast<int>(energies.size()); }

  void validate() const {
    if (energies.size() == 0)
      throw std::invalid_argument("SmallSystem: needs at least one level");
    for (int j = 1; j < energies.size(); ++j)
      if (energies(j) < energies(j - 1))
        throw std::invalid_argument("SmallSystem: energies must be ascending");
  }

  Matrix hamiltonian() const {
    validate();
    Matrix k = Matrix::Zero(nu(), nu());
    for (int j = 0; j < nu(); ++j) k(j, j) = energies(j);
    return k;
  }
};

inline SmallSystem make_small(std::initializer_list<double> energies) {
  SmallSystem s;
  s.energies = RealVector(static_cast<Eigen::Index>(energies.size()));
  int j = 0;
  for (double e : energies) s.energies(j++) = e;
  s.validate();
  return s;
}

// Coupling profile.  Either an analytic radial law
//   g(r) = amplitude * r^ir_exponent * exp(-(r/uv_scale)^2)
// multiplying a fixed matrix direction, or explicit per-mode sample matrices.
struct CouplingProfile {
  double mu{0.1};  // regularity margin used by the audits
  bool analytic{true};
  double amplitude{1.0};
  double ir_exponent{0.5};
  double uv_scale{1.0};
  Matrix direction{Matrix::Identity(1, 1)};
  std::vector<Matrix> samples;  // engaged when analytic == false

  int nu() const {
    return analytic ? static_cast<int>(direction.rows())
                    : (samples.empty() ? 0 : static_cast<int>(samples[0].rows()));
  }

  void validate() const {
    if (!(mu > 0.0))
      throw std::invalid_argument("CouplingProfile: mu must be positive");
    if (analytic) {
      if (!(uv_scale > 0.0))
        throw std::invalid_argument("CouplingProfile: uv_scale must be positive");
      if (direction.rows() != direction.cols() || direction.rows() < 1)
        throw std::invalid_argument("CouplingProfile: direction must be square");
    } else {
      if (samples.empty())
        throw std::invalid_argument("CouplingProfile: no sample matrices");
      for (const auto& g : samples)
        if (g.rows() != samples[0].rows() || g.cols() != samples[0].rows())
          throw std::invalid_argument(
              "CouplingProfile: sample matrices must share a square shape");
    }
  }

  static CouplingProfile scalar_law(double amplitude, double ir_exponent,
                                    double uv_scale, double mu,
                                    Matrix direction = Matrix::Identity(1, 1)) {
    CouplingProfile p;
    p.analytic = true;
    p.amplitude = amplitude;
    p.ir_exponent = ir_exponent;
    p.uv_scale = uv_scale;
    p.mu = mu;
    p.direction = std::move(direction);
    p.validate();
    return p;
  }

  static CouplingProfile from_samples(std::vector<Matrix> samples, double mu) {
    CouplingProfile p;
    p.analytic = false;
    p.mu = mu;
    p.samples = std::move(samples);
    p.validate();
    return p;
  }
};

inline double radial_value(const CouplingProfile& p, double r) {
  if (!p.analytic)
    throw std::invalid_argument("radial_value: profile has no analytic law");
  return p.amplitude * std::pow(r, p.ir_exponent) *
         std::exp(-(r / p.uv_scale) * (r / p.uv_scale));
}

// d/dr of the analytic law, exact.
inline double radial_d1(const CouplingProfile& p, double r) {
  const double s2 = p.uv_scale * p.uv_scale;
  const double u = std::exp(-r * r / s2);
  return p.amplitude * u *
         (p.ir_exponent * std::pow(r, p.ir_exponent - 1.0) -
          (2.0 / s2) * std::pow(r, p.ir_exponent + 1.0));
}

// d^2/dr^2 of the analytic law, exact.
inline double radial_d2(const CouplingProfile& p, double r) {
  const double s2 = p.uv_scale * p.uv_scale;
  const double u = std::exp(-r * r / s2);
  const double q = p.ir_exponent;
  return p.amplitude * u *
         (q * (q - 1.0) * std::pow(r, q - 2.0) -
          (2.0 * (2.0 * q + 1.0) / s2) * std::pow(r, q) +
          (4.0 / (s2 * s2)) * std::pow(r, q + 2.0));
}

// Radial quadrature grid: Gauss-Legendre panels on [0, omega_max] with
// geometrically refined panel edges omega_max * 2^{-k} toward the origin,
// so infrared behaviour is resolved without wasting ultraviolet nodes.
struct RadialGrid {
  double omega_max{4.0};
  int points_per_panel{8};
  int ir_levels{6};
  int reservoir{0};

  std::string id() const {
    return "gauss[wmax=" + std::to_string(omega_max) +
           ";ppp=" + std::to_string(points_per_panel) +
           ";lev=" + std::to_string(ir_levels) + "]";
  }
};

inline fock::ModeSet radial_modes(const RadialGrid& grid) {
  if (!(grid.omega_max > 0.0) || grid.points_per_panel < 1 || grid.ir_levels < 0)
    throw std::invalid_argument("radial_modes: bad grid parameters");
  const Quadrature base = gauss_legendre(grid.points_per_panel);
  std::vector<double> edges;
  edges.push_back(0.0);
  for (int k = grid.ir_levels; k >= 0; --k)
    edges.push_back(grid.omega_max * std::pow(2.0, -k));
  fock::ModeSet modes;
  for (std::size_t e = 0; e + 1 < edges.size(); ++e) {
    const double a = edges[e], b = edges[e + 1];
    for (int i = 0; i < grid.points_per_panel; ++i) {
      fock::Mode m;
      m.omega = 0.5 * (a + b) + 0.5 * (b - a) * base.nodes[static_cast<std::size_t>(i)];
      m.weight = 0.5 * (b - a) * base.weights[static_cast<std::size_t>(i)];
      m.reservoir = grid.reservoir;
      modes.modes.push_back(m);
    }
  }
  return modes;
}

// Quadrature embedding factor: |w| sqrt(4 pi * weight).  Sampled matrices are
// value * embedding, so sums of squared Frobenius norms approximate radial
// L^2 integrals with the spherical measure 4 pi w^2 dw.
inline double embedding_factor(const fock::Mode& m) {
  return std::abs(m.omega) * std::sqrt(4.0 * kPi * m.weight);
}

// Sample the profile on a mode set.  Analytic profiles with infrared exponent
// <= -3/2 are rejected: the squared radial integral diverges and no
// truncation-consistent normalization exists.
inline std::vector<Matrix> sample_coupling(const CouplingProfile& profile,
                                           const fock::ModeSet& modes) {
  profile.validate();
  if (profile.analytic) {
    if (profile.ir_exponent <= -1.5)
      throw std::invalid_argument(
          "sample_coupling: infrared exponent <= -3/2 is not square-integrable");
    std::vector<Matrix> out;
    out.reserve(modes.size());
    for (const auto& m : modes.modes) {
      if (!(m.omega > 0.0))
        throw std::invalid_argument("sample_coupling: modes must have omega > 0");
      out.push_back(radial_value(profile, m.omega) * embedding_factor(m) *
                    profile.direction);
    }
    return out;
  }
  if (profile.samples.size() != modes.size())
    throw std::invalid_argument(
        "sample_coupling: sample count does not match the mode set");
  return profile.samples;
}

// ---------------------------------------------------------------------------
// Weighted norms

struct NormEntry {
  double value{0.0};
  double quad_error{0.0};  // |value - value on a refined grid|
  bool divergent{false};   // detected from the infrared exponent arithmetic
};

struct CouplingNorms {
  NormEntry l2;             // || G ||
  NormEntry l2_over_sqrt;   // || G / sqrt|k| ||
  NormEntry l2_over_k;      // || G / |k| ||
  NormEntry grad;           // || dG/d|k| ||
  NormEntry a_weighted;     // || A G || with the supplied conjugate generator
  std::string grid_id;
};

// Leading infrared exponent of d^order/dr^order of r^p * exp(-(r/L)^2).
// The Gaussian contributes even powers r^{p+2m}; a term's derivative vanishes
// identically when p+2m is an integer in {0, ..., order-1}.
inline double infrared_slope(double p, int order) {
  for (int m = 0;; ++m) {
    const double q = p + 2.0 * m;
    bool vanishes = false;
    for (int k = 0; k < order; ++k)
      if (std::abs(q - k) < 1e-12) vanishes = true;
    if (!vanishes) return q - order;
    if (m > order + 2)
      throw std::logic_error("infrared_slope: no surviving term");
  }
}

namespace detail {

struct NormAccumulator {
  double l2{0.0}, over_sqrt{0.0}, over_k{0.0}, grad{0.0}, weighted{0.0};
};

// Value matrices (samples divided by the embedding factor) and their radial
// derivative: analytic profiles use the exact derivative, sampled profiles a
// difference quotient on the grid.
inline std::vector<Matrix> value_matrices(const CouplingProfile& profile,
                                          const fock::ModeSet& modes,
                                          const std::vector<Matrix>& gs) {
  std::vector<Matrix> vals(gs.size());
  for (std::size_t j = 0; j < gs.size(); ++j)
    vals[j] = gs[j] / embedding_factor(modes.modes[j]);
  (void)profile;
  return vals;
}

inline std::vector<Matrix> derivative_matrices(const CouplingProfile& profile,
                                               const fock::ModeSet& modes,
                                               const std::vector<Matrix>& vals) {
  std::vector<Matrix> der(vals.size());
  if (profile.analytic) {
    for (std::size_t j = 0; j < vals.size(); ++j)
      der[j] = radial_d1(profile, modes.modes[j].omega) * profile.direction;
    return der;
  }
  const RealMatrix d = conjugate::difference_matrix(modes);
  for (std::size_t j = 0; j < vals.size(); ++j) {
    Matrix acc = Matrix::Zero(vals[0].rows(), vals[0].cols());
    for (std::size_t k = 0; k < vals.size(); ++k) {
      const double w = d(static_cast<int>(j), static_cast<int>(k));
      if (w != 0.0) acc += w * vals[k];
    }
    der[j] = acc;
  }
  return der;
}

inline NormAccumulator accumulate_norms(const CouplingProfile& profile,
                                        const fock::ModeSet& modes,
                                        const conjugate::ConjugateSpec& conj) {
  const std::vector<Matrix> gs = sample_coupling(profile, modes);
  const std::vector<Matrix> vals = value_matrices(profile, modes, gs);
  const std::vector<Matrix> der = derivative_matrices(profile, modes, vals);
  const Matrix a = conjugate::conjugate_a(modes, conj);
  NormAccumulator acc;
  for (std::size_t j = 0; j < gs.size(); ++j) {
    const double n2 = gs[j].squaredNorm();
    const double w = modes.modes[j].omega;
    acc.l2 += n2;
    acc.over_sqrt += n2 / w;
    acc.over_k += n2 / (w * w);
    const double e = embedding_factor(modes.modes[j]);
    acc.grad += der[j].squaredNorm() * e * e;
    Matrix av = Matrix::Zero(vals[0].rows(), vals[0].cols());
    for (std::size_t k = 0; k < vals.size(); ++k) {
      const cplx c = a(static_cast<int>(j), static_cast<int>(k));
      if (c != cplx{0.0, 0.0}) av += c * vals[k];
    }
    acc.weighted += av.squaredNorm() * e * e;
  }
  return acc;
}

}  // namespace detail

inline CouplingNorms coupling_norms(const CouplingProfile& profile,
                                    const RadialGrid& grid,
                                    const conjugate::ConjugateSpec& conj) {
  profile.validate();
  conj.validate();
  const fock::ModeSet coarse = radial_modes(grid);
  if (!profile.analytic && profile.samples.size() != coarse.size())
    throw std::invalid_argument(
        "coupling_norms: sampled profile does not match the grid");
  const detail::NormAccumulator a =
      detail::accumulate_norms(profile, coarse, conj);
  CouplingNorms out;
  out.grid_id = grid.id();
  auto fill = [](NormEntry& e, double sq) { e.value = std::sqrt(sq); };
  fill(out.l2, a.l2);
  fill(out.l2_over_sqrt, a.over_sqrt);
  fill(out.l2_over_k, a.over_k);
  fill(out.grad, a.grad);
  fill(out.a_weighted, a.weighted);

  if (profile.analytic) {
    RadialGrid fine = grid;
    fine.points_per_panel *= 2;
    fine.ir_levels += 2;
    const detail::NormAccumulator b =
        detail::accumulate_norms(profile, radial_modes(fine), conj);
    out.l2.quad_error = std::abs(out.l2.value - std::sqrt(b.l2));
    out.l2_over_sqrt.quad_error =
        std::abs(out.l2_over_sqrt.value - std::sqrt(b.over_sqrt));
    out.l2_over_k.quad_error = std::abs(out.l2_over_k.value - std::sqrt(b.over_k));
    out.grad.quad_error = std::abs(out.grad.value - std::sqrt(b.grad));
    out.a_weighted.quad_error =
        std::abs(out.a_weighted.value - std::sqrt(b.weighted));

    const double p = profile.ir_exponent;
    const double s1 = infrared_slope(p, 1);
    const double tol = 1e-12;
    out.l2.divergent = (2.0 * p + 2.0 <= -1.0 + tol);
    out.l2_over_sqrt.divergent = (2.0 * p + 1.0 <= -1.0 + tol);
    out.l2_over_k.divergent = (2.0 * p <= -1.0 + tol);
    out.grad.divergent = (2.0 * s1 + 2.0 <= -1.0 + tol);
    // The generator norm is controlled by the gradient and 1/|k| norms; it
    // inherits divergence from either.
    out.a_weighted.divergent = out.grad.divergent || out.l2_over_k.divergent;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Regularity audit

struct ClauseCheck {
  int order{0};            // derivative order of the clause
  double required{0.0};    // exponent the clause demands (raw)
  double enforced{0.0};    // exponent actually enforced (clamped at zero)
  double slope{0.0};       // infrared or ultraviolet exponent witnessed
  double constant{0.0};    // grid-witnessed clause constant
  bool pass{false};
};

struct ConditionReport {
  std::string name;
  bool pass{false};
  std::vector<ClauseCheck> infrared;
  std::vector<ClauseCheck> ultraviolet;
  std::string note;
};

struct RegularityReport {
  int order_n{0};
  double mu{0.0};
  ConditionReport hamiltonian_grade;   // singularity budget |k|^{n-3/2+mu-|a|}
  ConditionReport liouvillean_grade;   // stricter budget |k|^{n-1+mu-|a|}
  ConditionReport glued_grade;         // 1-D budget on the signed extension
  bool from_samples{false};
  std::string grid_note;
};

namespace detail {

// A clause |d^j g| <= C w^req on the infrared side passes when the witnessed
// slope is at least min(req, 0): a positive required exponent would force the
// profile to vanish at the origin, which these singularity budgets do not
// intend, so the enforced exponent is clamped at zero.
inline ClauseCheck ir_clause(int j, double required, double slope,
                             double constant, double tol) {
  ClauseCheck c;
  c.order = j;
  c.required = required;
  c.enforced = std::min(required, 0.0);
  c.slope = slope;
  c.constant = constant;
  c.pass = slope >= c.enforced - tol;
  return c;
}

inline ClauseCheck uv_clause(int j, double required, double slope,
                             double constant, double tol) {
  ClauseCheck c;
  c.order = j;
  c.required = required;
  c.enforced = required;
  c.slope = slope;
  c.constant = constant;
  c.pass = slope <= required + tol;
  return c;
}

// Local integrability of the j-th derivative of r^p near the origin, with
// the ambient measure r^{dim_minus_one} dr.  Nonnegative even integer powers
// are smooth and always qualify.
inline bool derivative_locally_integrable(double p, int j, int dim_minus_one) {
  const double rounded = std::round(p);
  if (std::abs(p - rounded) < 1e-12 && rounded >= 0.0 &&
      std::fmod(rounded, 2.0) == 0.0)
    return true;
  return p - j + dim_minus_one > -1.0 + 1e-12;
}

// Least-squares slope of ln|v| against ln(w) over [first, last).
inline double fitted_slope(const std::vector<double>& w,
                           const std::vector<double>& v, std::size_t first,
                           std::size_t last, double* residual = nullptr) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t n = 0;
  for (std::size_t i = first; i < last; ++i) {
    if (!(v[i] > 0.0) || !std::isfinite(v[i])) continue;
    const double x = std::log(w[i]), y = std::log(v[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++n;
  }
  if (n < 3)
    throw std::invalid_argument(
        "audit_regularity: insufficient grid resolution for a slope fit");
  const double denom = static_cast<double>(n) * sxx - sx * sx;
  const double slope = (static_cast<double>(n) * sxy - sx * sy) / denom;
  if (residual != nullptr) {
    const double icpt = (sy - slope * sx) / static_cast<double>(n);
    double rr = 0;
    std::size_t m = 0;
    for (std::size_t i = first; i < last; ++i) {
      if (!(v[i] > 0.0) || !std::isfinite(v[i])) continue;
      const double e = std::log(v[i]) - (icpt + slope * std::log(w[i]));
      rr += e * e;
      ++m;
    }
    *residual = std::sqrt(rr / static_cast<double>(m));
  }
  return slope;
}

struct DerivativeTable {
  std::vector<double> omegas;                  // grid nodes
  std::vector<std::vector<double>> magnitude;  // [order][node] |d^j g|
  std::vector<double> symbolic_slope;          // per order, NaN when fitted
  bool analytic{false};
};

inline DerivativeTable derivative_table(const CouplingProfile& profile,
                                        const fock::ModeSet& modes, int orders,
                                        bool glued) {
  DerivativeTable t;
  t.analytic = profile.analytic;
  t.omegas.reserve(modes.size());
  for (const auto& m : modes.modes) t.omegas.push_back(m.omega);
  t.magnitude.assign(static_cast<std::size_t>(orders) + 1, {});
  t.symbolic_slope.assign(static_cast<std::size_t>(orders) + 1,
                          std::numeric_limits<double>::quiet_NaN());
  if (profile.analytic) {
    // The glued audit concerns w^{1/2} g(w); its power series in w shifts the
    // infrared exponent by +1/2 and keeps the Gaussian envelope.
    CouplingProfile law = profile;
    if (glued) law.ir_exponent += 0.5;
    for (int j = 0; j <= orders; ++j) {
      t.symbolic_slope[static_cast<std::size_t>(j)] =
          infrared_slope(law.ir_exponent, j);
      auto& col = t.magnitude[static_cast<std::size_t>(j)];
      col.reserve(modes.size());
      for (const auto& m : modes.modes) {
        const double v = (j == 0)   ? radial_value(law, m.omega)
                         : (j == 1) ? radial_d1(law, m.omega)
                                    : radial_d2(law, m.omega);
        col.push_back(std::abs(v));
      }
    }
    return t;
  }
  if (modes.size() < 6 * static_cast<std::size_t>(orders + 1))
    throw std::invalid_argument(
        "audit_regularity: insufficient grid resolution for a sampled profile");
  std::vector<double> level(modes.size());
  for (std::size_t j = 0; j < modes.size(); ++j) {
    double v = profile.samples[j].norm() / embedding_factor(modes.modes[j]);
    if (glued) v *= std::sqrt(modes.modes[j].omega);
    level[j] = v;
  }
  // Derivative magnitudes via the local log-log slope, |d^{j+1} v| ~
  // |s| |d^j v| / w with s the slope between neighbouring nodes.  Unlike raw
  // difference quotients this is exact for power laws on any grid geometry,
  // which is what the infrared fits need on geometrically refined panels.
  const std::size_t count = modes.size();
  std::vector<double> cur = level;
  for (int j = 0; j <= orders; ++j) {
    auto& col = t.magnitude[static_cast<std::size_t>(j)];
    col.resize(count);
    for (std::size_t i = 0; i < count; ++i) col[i] = std::abs(cur[i]);
    std::vector<double> next(count, 0.0);
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t lo = (i > 0) ? i - 1 : i;
      const std::size_t hi = (i + 1 < count) ? i + 1 : i;
      if (lo == hi || !(col[lo] > 0.0) || !(col[hi] > 0.0)) continue;
      const double s = (std::log(col[hi]) - std::log(col[lo])) /
                       (std::log(t.omegas[hi]) - std::log(t.omegas[lo]));
      next[i] = std::abs(s) * col[i] / t.omegas[i];
    }
    cur = next;
  }
  return t;
}

inline ConditionReport audit_condition(
    const DerivativeTable& t, const std::string& name, int n,
    const std::vector<double>& ir_required,
    const std::vector<double>& uv_required, double p, int dim_minus_one,
    bool analytic) {
  ConditionReport rep;
  rep.name = name;
  rep.pass = true;
  const double tol = analytic ? 1e-9 : 0.05;
  // Window boundaries: infrared nodes are those below 1.0 (or the lower third
  // of the grid if none), ultraviolet nodes those above.
  std::size_t split = 0;
  while (split < t.omegas.size() && t.omegas[split] < 1.0) ++split;
  if (split == 0 || split == t.omegas.size())
    split = t.omegas.size() / 2;

  for (int j = 0; j <= n; ++j) {
    const auto& mag = t.magnitude[static_cast<std::size_t>(j)];
    double slope;
    if (analytic) {
      slope = t.symbolic_slope[static_cast<std::size_t>(j)];
    } else {
      double residual = 0.0;
      const std::size_t ir_last =
          std::min(std::max<std::size_t>(split / 2, 4), t.omegas.size());
      slope = fitted_slope(t.omegas, mag, 0, ir_last, &residual);
      if (residual > 0.35)
        throw std::invalid_argument(
            "audit_regularity: insufficient grid resolution for a sampled "
            "profile (noisy derivative fit)");
    }
    const double req = ir_required[static_cast<std::size_t>(j)];
    const double enforced = std::min(req, 0.0);
    double constant = 0.0;
    for (std::size_t i = 0; i < split; ++i)
      constant = std::max(constant, mag[i] / std::pow(t.omegas[i], enforced));
    ClauseCheck c = ir_clause(j, req, slope, constant, tol);
    if (analytic && !derivative_locally_integrable(p, j, dim_minus_one)) {
      c.pass = false;
      rep.note = "derivative order " + std::to_string(j) +
                 " is not locally integrable near the origin";
    }
    rep.pass = rep.pass && c.pass;
    rep.infrared.push_back(c);

    const double uv_req = uv_required[static_cast<std::size_t>(j)];
    double uv_slope;
    if (analytic) {
      uv_slope = -std::numeric_limits<double>::infinity();  // Gaussian tail
    } else {
      uv_slope = fitted_slope(t.omegas, mag,
                              split + (t.omegas.size() - split) / 2,
                              t.omegas.size(), nullptr);
    }
    double uv_constant = 0.0;
    for (std::size_t i = split; i < t.omegas.size(); ++i)
      uv_constant =
          std::max(uv_constant, mag[i] / std::pow(t.omegas[i], uv_req));
    ClauseCheck c2 = uv_clause(j, uv_req, uv_slope, uv_constant, tol);
    rep.pass = rep.pass && c2.pass;
    rep.ultraviolet.push_back(c2);
  }
  return rep;
}

}  // namespace detail

// Audits the profile against the order-n decay/regularity budgets that the
// Hamiltonian-side and Liouvillean-side constructions consume, plus the
// glued variant formulated for the signed-frequency extension
// w^{1/2} g(|w|).  Grid-witnessed only: no continuum claim is made.
inline RegularityReport audit_regularity(const CouplingProfile& profile, int n,
                                         const RadialGrid& grid = RadialGrid{}) {
  profile.validate();
  if (n < 0 || n > 2)
    throw std::invalid_argument("audit_regularity: order must be 0, 1, or 2");
  const fock::ModeSet modes = radial_modes(grid);
  if (!profile.analytic && profile.samples.size() != modes.size())
    throw std::invalid_argument(
        "audit_regularity: sampled profile does not match the grid");

  RegularityReport rep;
  rep.order_n = n;
  rep.mu = profile.mu;
  rep.from_samples = !profile.analytic;
  rep.grid_note = grid.id() + " (" + std::to_string(modes.size()) +
                  " nodes; grid-witnessed, no continuum claim)";

  std::vector<double> hg_ir, hg_uv, lg_ir, lg_uv, gl_ir, gl_uv;
  for (int j = 0; j <= n; ++j) {
    hg_ir.push_back(n - 1.5 + profile.mu - j + (n == 0 ? 0.5 : 0.0));
    hg_uv.push_back(-1.5 - profile.mu);
    lg_ir.push_back(n - 1.0 + profile.mu - j);
    lg_uv.push_back(-1.5 - profile.mu - (j == 0 ? 1.0 : 0.0));
    gl_ir.push_back(n - 1.0 + profile.mu - j);
    gl_uv.push_back(-1.0 - profile.mu - (j == 0 ? 1.0 : 0.0));
  }

  const double p = profile.analytic ? profile.ir_exponent : 0.0;
  const detail::DerivativeTable plain =
      detail::derivative_table(profile, modes, n, false);
  rep.hamiltonian_grade =
      detail::audit_condition(plain, "hamiltonian-grade order " + std::to_string(n),
                              n, hg_ir, hg_uv, p, 2, profile.analytic);
  rep.liouvillean_grade =
      detail::audit_condition(plain, "liouvillean-grade order " + std::to_string(n),
                              n, lg_ir, lg_uv, p, 2, profile.analytic);
  const detail::DerivativeTable glued =
      detail::derivative_table(profile, modes, n, true);
  rep.glued_grade = detail::audit_condition(
      glued, "glued-grade order " + std::to_string(n), n, gl_ir, gl_uv, p + 0.5,
      0, profile.analytic);
  return rep;
}

// ---------------------------------------------------------------------------
// Thermal doubling

// Bose occupation 1/(e^{beta w} - 1).  beta may be +infinity (vacuum).
inline double planck_density(double beta, double omega) {
  if (!(omega > 0.0))
    throw std::invalid_argument("planck_density: omega must be positive");
  if (std::isinf(beta)) return 0.0;
  if (!(beta > 0.0))
    throw std::invalid_argument("planck_density: beta must be positive");
  const double x = beta * omega;
  const double e = std::expm1(x);
  return std::isinf(e) ? 0.0 : 1.0 / e;
}

struct ThermalPair {
  Matrix left;   // acts on the doubled level space, dimension nu^2
  Matrix right;
  double rho{0.0};
};

// Doubled-space couplings at inverse temperatures given per reservoir:
//   left  = sqrt(1+rho) (G x 1) - sqrt(rho) (1 x G^T)
//   right = sqrt(1+rho) (1 x conj G) - sqrt(rho) (G^dag x 1)
// At beta = infinity these reduce to (G x 1, 1 x conj G) exactly.
inline std::vector<ThermalPair> thermal_couplings(
    const CouplingProfile& profile, const fock::ModeSet& modes,
    const std::vector<double>& beta_by_reservoir) {
  const std::vector<Matrix> gs = sample_coupling(profile, modes);
  const int nu = static_cast<int>(gs.empty() ? 1 : gs[0].rows());
  const Matrix id = Matrix::Identity(nu, nu);
  std::vector<ThermalPair> out;
  out.reserve(gs.size());
  for (std::size_t j = 0; j < gs.size(); ++j) {
    const std::size_t res = static_cast<std::size_t>(modes.modes[j].reservoir);
    if (res >= beta_by_reservoir.size())
      throw std::invalid_argument(
          "thermal_couplings: missing beta for a reservoir tag");
    ThermalPair p;
    p.rho = planck_density(beta_by_reservoir[res], modes.modes[j].omega);
    const double cp = std::sqrt(1.0 + p.rho);
    const double cm = std::sqrt(p.rho);
    const Matrix& g = gs[j];
    p.left = cp * kron(g, id) - cm * kron(id, g.transpose());
    p.right = cp * kron(id, g.conjugate()) - cm * kron(g.adjoint(), id);
    out.push_back(std::move(p));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Glued signed-frequency form

// Positive-branch prefactor sqrt(w / (1 - e^{-beta w})), continued to signed
// w where it stays positive; at w=1, beta=1 it is about 1.2578.
inline double glued_prefactor(double beta, double omega) {
  if (omega == 0.0)
    throw std::invalid_argument("glued_prefactor: omega must be nonzero");
  if (std::isinf(beta)) return omega > 0.0 ? std::sqrt(omega) : 0.0;
  const double denom = -std::expm1(-beta * omega);
  const double ratio = omega / denom;
  return std::sqrt(ratio);
}

struct GluedCoupling {
  fock::ModeSet modes;             // signed frequencies, ascending
  std::vector<Matrix> form;        // thermal-pair representation per node
  std::vector<Matrix> form_alt;    // prefactor representation per node
  std::vector<double> embed;       // embedding factor per node
  std::vector<int> positive_index; // source mode j -> glued slot of +w_j
  std::vector<int> negative_index; // source mode j -> glued slot of -w_j
  double representation_gap{0.0};  // max entrywise deviation between the two
};

// Folds the doubled thermal pair into a single field over signed
// frequencies: the +w_j node carries the left coupling, the -w_j node carries
// minus the right coupling.  The alternative representation distributes the
// thermal prefactors over the two branch restrictions instead; the two agree
// exactly when every sampled matrix is Hermitian.
inline GluedCoupling glued_coupling(const CouplingProfile& profile,
                                    const fock::ModeSet& modes,
                                    const std::vector<double>& beta_by_reservoir) {
  const std::vector<Matrix> gs = sample_coupling(profile, modes);
  const std::vector<ThermalPair> th =
      thermal_couplings(profile, modes, beta_by_reservoir);
  const int nu = static_cast<int>(gs.empty() ? 1 : gs[0].rows());
  const Matrix id = Matrix::Identity(nu, nu);

  struct Node {
    double omega;
    std::size_t src;
    bool positive;
  };
  std::vector<Node> nodes;
  nodes.reserve(2 * modes.size());
  for (std::size_t j = 0; j < modes.size(); ++j) {
    nodes.push_back({-modes.modes[j].omega, j, false});
    nodes.push_back({modes.modes[j].omega, j, true});
  }
  std::sort(nodes.begin(), nodes.end(), [&](const Node& a, const Node& b) {
    if (a.omega != b.omega) return a.omega < b.omega;
    return modes.modes[a.src].reservoir < modes.modes[b.src].reservoir;
  });

  GluedCoupling out;
  out.positive_index.assign(modes.size(), -1);
  out.negative_index.assign(modes.size(), -1);
  out.modes.modes.reserve(nodes.size());
  out.form.reserve(nodes.size());
  out.form_alt.reserve(nodes.size());
  out.embed.reserve(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const Node& nd = nodes[i];
    const fock::Mode& src = modes.modes[nd.src];
    fock::Mode m;
    m.omega = nd.omega;
    m.weight = src.weight;
    m.reservoir = src.reservoir;
    out.modes.modes.push_back(m);
    out.embed.push_back(embedding_factor(src));
    const ThermalPair& tp = th[nd.src];
    const Matrix& g = gs[nd.src];
    const double cp = std::sqrt(1.0 + tp.rho);
    const double cm = std::sqrt(tp.rho);
    if (nd.positive) {
      out.positive_index[nd.src] = static_cast<int>(i);
      out.form.push_back(tp.left);
      out.form_alt.push_back(cp * kron(g, id) - cm * kron(id, g.conjugate()));
    } else {
      out.negative_index[nd.src] = static_cast<int>(i);
      out.form.push_back(-tp.right);
      out.form_alt.push_back(cm * kron(g.adjoint(), id) -
                             cp * kron(id, g.transpose()));
    }
    const Matrix diff = out.form.back() - out.form_alt.back();
    out.representation_gap =
        std::max(out.representation_gap, diff.cwiseAbs().maxCoeff());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Inverse-temperature decay of the thermal correction

struct DifferenceDecay {
  std::vector<double> betas;
  std::vector<double> plain;     // || F_beta - F_infinity ||
  std::vector<double> weighted;  // || A (F_beta - F_infinity) ||
  double plain_slope{0.0};
  double weighted_slope{0.0};
};

// Norms of the thermal correction to the glued coupling on a beta ladder,
// plus fitted log-log slopes.  The weighted norm applies the conjugate
// generator built on the signed grid; it is the quantity with the uniform
// -1/2 decay rate for profiles with mildly regular infrared behaviour.
inline DifferenceDecay coupling_difference_bound(
    const CouplingProfile& profile, const fock::ModeSet& modes,
    const std::vector<double>& betas, const conjugate::ConjugateSpec& conj) {
  conj.validate();
  const std::vector<double> inf_ladder(
      1, std::numeric_limits<double>::infinity());
  std::vector<double> per_res;

  DifferenceDecay out;
  out.betas = betas;
  GluedCoupling base;
  {
    std::size_t max_res = 0;
    for (const auto& m : modes.modes)
      max_res = std::max(max_res, static_cast<std::size_t>(m.reservoir));
    per_res.assign(max_res + 1, std::numeric_limits<double>::infinity());
    base = glued_coupling(profile, modes, per_res);
  }
  const Matrix a = conjugate::conjugate_a(base.modes, conj);
  const std::size_t count = base.modes.size();

  for (double beta : betas) {
    std::fill(per_res.begin(), per_res.end(), beta);
    const GluedCoupling gb = glued_coupling(profile, modes, per_res);
    double plain_sq = 0.0, weighted_sq = 0.0;
    std::vector<Matrix> diff_vals(count);
    for (std::size_t i = 0; i < count; ++i) {
      const Matrix d = gb.form[i] - base.form[i];
      plain_sq += d.squaredNorm();
      diff_vals[i] = d / base.embed[i];
    }
    for (std::size_t i = 0; i < count; ++i) {
      Matrix av = Matrix::Zero(diff_vals[0].rows(), diff_vals[0].cols());
      for (std::size_t k = 0; k < count; ++k) {
        const cplx c = a(static_cast<int>(i), static_cast<int>(k));
        if (c != cplx{0.0, 0.0}) av += c * diff_vals[k];
      }
      weighted_sq += av.squaredNorm() * base.embed[i] * base.embed[i];
    }
    out.plain.push_back(std::sqrt(plain_sq));
    out.weighted.push_back(std::sqrt(weighted_sq));
  }
  auto slope = [&](const std::vector<double>& v) {
    std::vector<double> x, y;
    for (std::size_t i = 0; i < v.size(); ++i)
      if (std::isfinite(out.betas[i]) && v[i] > 0.0) {
        x.push_back(out.betas[i]);
        y.push_back(v[i]);
      }
    if (x.size() < 3) return 0.0;
    return detail::fitted_slope(x, y, 0, x.size(), nullptr);
  };
  out.plain_slope = slope(out.plain);
  out.weighted_slope = slope(out.weighted);
  return out;
}

}  // namespace pflab::coupling
