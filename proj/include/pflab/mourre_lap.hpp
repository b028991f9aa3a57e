// mourre_lap.hpp — deformed resolvents and limiting-absorption probes for
// Hermitian pairs carrying a window estimate: smooth window profiles, the
// penalized observable M = T' + c f_perp(T), resolvents of T - i eps T',
// regularization calculus for unbounded conjugates, and fitted-constant
// probes of the weighted resolvent bounds.
#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "pflab/conjugate.hpp"
#include "pflab/hamiltonian.hpp"
#include "pflab/linalg.hpp"

namespace pflab::lap {

using hamiltonian::HamiltonianBundle;

// ---------------------------------------------------------------------------
// Smooth window profile

// C-infinity bump supported on (lo, hi): identically 1 on the inner plateau,
// exp-type transitions to 0 at the endpoints.  `plateau` is the fraction of
// the half-width kept flat.
struct WindowProfile {
  double lo{0.0};
  double hi{1.0};
  double plateau{0.5};

  void validate() const {
    if (!(lo < hi))
      throw std::invalid_argument("WindowProfile: support must be nonempty");
    if (!(plateau > 0.0) || !(plateau < 1.0))
      throw std::invalid_argument(
          "WindowProfile: plateau fraction must lie in (0, 1)");
  }

  double operator()(double t) const {
    const double half = 0.5 * (hi - lo);
    const double inner = plateau * half;
    const double off = std::abs(t - 0.5 * (lo + hi));
    if (off >= half) return 0.0;
    if (off <= inner) return 1.0;
    const auto h = [](double y) { return y > 0.0 ? std::exp(-1.0 / y) : 0.0; };
    const double x = (half - off) / (half - inner);
    return h(x) / (h(x) + h(1.0 - x));
  }
};

// ---------------------------------------------------------------------------
// Regularization calculus

// Bounded stand-ins for an unbounded direction A: the damped identity
// i n (A + i n)^{-1} and the damped generator A i n (A + i n)^{-1}, which
// also equals i n + n^2 (A + i n)^{-1}.
struct Regularizer {
  Matrix i_n;
  Matrix a_n;
  double n{1.0};
};

inline Regularizer regularizer(const Matrix& a, double n) {
  if (a.rows() != a.cols())
    throw std::invalid_argument("regularizer: matrix must be square");
  if (!(n >= 1.0))
    throw std::invalid_argument("regularizer: scale must be at least one");
  const Eigen::Index d = a.rows();
  const Matrix id = Matrix::Identity(d, d);
  const Matrix shifted = a + cplx(0.0, n) * id;
  const Matrix inv = shifted.partialPivLu().solve(id);
  if ((shifted * inv - id).cwiseAbs().maxCoeff() >
      1e-8 * std::max(1.0, a.cwiseAbs().maxCoeff()))
    throw std::runtime_error("regularizer: shifted direction is singular");
  Regularizer reg;
  reg.n = n;
  reg.i_n = cplx(0.0, n) * inv;
  reg.a_n = a * reg.i_n;
  return reg;
}

// Convergence diagnostics on a probe vector.
inline double regularizer_identity_gap(const Regularizer& reg, const Vector& u) {
  return (reg.i_n * u - u).norm();
}

inline double regularizer_generator_gap(const Regularizer& reg, const Matrix& a,
                                        const Vector& u) {
  return (reg.a_n * u - a * u).norm();
}

// ---------------------------------------------------------------------------
// First-order calculus along a direction

struct SlopeReport {
  double slope{0.0};             // max over the grid of ||[b, exp(itA)]|| / t
  double commutator_norm{0.0};   // ||[b, a]||
  std::vector<double> ratios;    // one entry per grid time
};

// Lipschitz witness for the group criterion: the commutator with the unitary
// group grows at most linearly in t, with slope matched by ||[b, a]||.
inline SlopeReport c1_slope_test(const Matrix& b, const Matrix& a,
                                 const std::vector<double>& ts) {
  if (b.rows() != b.cols() || a.rows() != a.cols() || b.rows() != a.rows())
    throw std::invalid_argument("c1_slope_test: shape mismatch");
  if (ts.empty())
    throw std::invalid_argument("c1_slope_test: time grid must be nonempty");
  const Eigensystem es = eig_hermitian(a);
  SlopeReport rep;
  rep.commutator_norm = op_norm((b * a - a * b).eval());
  rep.ratios.reserve(ts.size());
  for (double t : ts) {
    if (!(t > 0.0))
      throw std::invalid_argument("c1_slope_test: times must be positive");
    Vector phase(es.values.size());
    for (Eigen::Index i = 0; i < es.values.size(); ++i)
      phase(i) = std::exp(cplx(0.0, t * es.values(i)));
    const Matrix w = es.vectors * phase.asDiagonal() * es.vectors.adjoint();
    const double ratio = op_norm((b * w - w * b).eval()) / t;
    rep.ratios.push_back(ratio);
    rep.slope = std::max(rep.slope, ratio);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// The penalized triple

// A Hermitian operator under study, its commutator observable, and a
// conjugate direction, together with the window data making
// m = tprime + c_m * f_perp(t) provably bounded below by e.
struct MourreTriple {
  Matrix t;
  Matrix tprime;
  Matrix a;
  WindowProfile window;
  double e{0.0};    // witnessed lower bound of m
  double c_m{0.0};  // penalty weight off the window
  double eta{0.0};  // shift with tprime + eta >= 1
  Matrix fperp_t;   // (1 - f)(t)
  Matrix m;         // tprime + c_m * fperp(t)
  Matrix m_half;    // m^{1/2}
  Eigensystem t_eig;
  Eigensystem m_eig;

  std::size_t dim() const { return static_cast<std::size_t>(t.rows()); }
};

// Penalty weight under which the compressed window bound upgrades to an
// operator bound: splitting a vector into its inside-window and outside
// spectral parts, the two-block quadratic form [[w - e, -n], [-n, c - n - e]]
// with n = ||tprime|| is positive semidefinite once c >= n + e + n^2/(w - e).
inline double penalty_weight(double witnessed, double tprime_norm, double e) {
  if (!(e > 0.0))
    throw std::invalid_argument("penalty_weight: target bound must be positive");
  if (!(witnessed > e))
    throw std::invalid_argument(
        "penalty_weight: target must sit strictly below the witnessed bound");
  return tprime_norm + e + tprime_norm * tprime_norm / (witnessed - e);
}

inline MourreTriple build_triple(Matrix t, Matrix tprime, Matrix a,
                                 WindowProfile window, double e, double c_m,
                                 double tol = 1e-10) {
  window.validate();
  if (t.rows() != t.cols() || tprime.rows() != tprime.cols() ||
      a.rows() != a.cols() || t.rows() != tprime.rows() || t.rows() != a.rows())
    throw std::invalid_argument("build_triple: shape mismatch");
  if (!(e > 0.0) || !(c_m > 0.0))
    throw std::invalid_argument("build_triple: constants must be positive");

  MourreTriple tr;
  tr.t = std::move(t);
  tr.tprime = std::move(tprime);
  tr.a = std::move(a);
  tr.window = window;
  tr.e = e;
  tr.c_m = c_m;
  tr.t_eig = eig_hermitian(tr.t);

  Vector fd(tr.t_eig.values.size());
  for (Eigen::Index i = 0; i < fd.size(); ++i)
    fd(i) = 1.0 - tr.window(tr.t_eig.values(i));
  tr.fperp_t = tr.t_eig.vectors * fd.asDiagonal() * tr.t_eig.vectors.adjoint();
  tr.m = tr.tprime + c_m * tr.fperp_t;
  tr.m_eig = eig_hermitian(tr.m);
  if (!(tr.m_eig.values(0) >= e - tol))
    throw std::invalid_argument(
        "build_triple: window estimate fails on the proposed profile");
  Vector sq(tr.m_eig.values.size());
  for (Eigen::Index i = 0; i < sq.size(); ++i)
    sq(i) = std::sqrt(std::max(tr.m_eig.values(i), 0.0));
  tr.m_half = tr.m_eig.vectors * sq.asDiagonal() * tr.m_eig.vectors.adjoint();
  tr.eta = std::max(0.0, 1.0 - lambda_min(tr.tprime));
  return tr;
}

// Norm induced by m and its dual, via the stored spectral data.
inline double weighted_norm(const MourreTriple& tr, const Vector& v) {
  const Vector c = tr.m_eig.vectors.adjoint() * v;
  double s = 0.0;
  for (Eigen::Index i = 0; i < c.size(); ++i)
    s += tr.m_eig.values(i) * std::norm(c(i));
  return std::sqrt(s);
}

inline double dual_norm(const MourreTriple& tr, const Vector& v) {
  const Vector c = tr.m_eig.vectors.adjoint() * v;
  double s = 0.0;
  for (Eigen::Index i = 0; i < c.size(); ++i)
    s += std::norm(c(i)) / tr.m_eig.values(i);
  return std::sqrt(s);
}

// Package a product-space bundle as a probe triple: the assembled operator,
// its commutator surrogate, and the second-quantized conjugate direction.
// The window is centered on the certificate data and the penalty weight is
// derived from the witnessed compression bound.
inline MourreTriple bundle_triple(const HamiltonianBundle& b,
                                  const conjugate::ConjugateSpec& spec,
                                  double center_e, double kappa,
                                  double witnessed, double e,
                                  double plateau = 0.5, double tol = 1e-10) {
  const Matrix tprime = hamiltonian::detail::mourre_surrogate(b, spec);
  const Matrix a_small = conjugate::conjugate_a(b.modes, spec);
  const Matrix a_full =
      fock::as_hermitian(hamiltonian::detail::product_op(
                             hamiltonian::detail::small_identity(b.nu()),
                             fock::dgamma(b.basis, a_small), b.product_id))
          .to_dense();
  WindowProfile window{center_e - kappa, center_e + kappa, plateau};
  const double c_m = penalty_weight(witnessed, op_norm(tprime), e);
  return build_triple(b.h.to_dense(), tprime, a_full, window, e, c_m, tol);
}

// ---------------------------------------------------------------------------
// Deformed resolvents

struct ResolventSample {
  double eps{0.0};
  cplx z{0.0};
  Matrix r;                       // (t - i eps tprime - z)^{-1}
  double norm_r{0.0};             // ||r||
  double norm_msqrt_r{0.0};       // ||m^{1/2} r||
  double norm_msqrt_r_fperp{0.0}; // ||m^{1/2} r f_perp(t)||
  double solve_residual{0.0};
  double apriori_slack{0.0};      // worst defect of the elementary bound
};

// Resolvent of the deformed operator t - i eps tprime at z, solved densely.
// The elementary bound
//   |eps| ||u||_m^2 + |Im z| ||u||^2
//     <= |Im<u, (t_eps - z)u>| + |eps| c_m ||u|| ||f_perp(t) u||
// is checked on every solved column; its defect is reported as slack.
inline ResolventSample t_epsilon_resolvent(const MourreTriple& tr, double eps,
                                           cplx z, double tol = 1e-8) {
  if (eps == 0.0 || !(eps * z.imag() > 0.0))
    throw std::invalid_argument(
        "t_epsilon_resolvent: need a deformation with eps * Im z > 0");
  const Eigen::Index d = static_cast<Eigen::Index>(tr.dim());
  const Matrix id = Matrix::Identity(d, d);
  const Matrix sys = tr.t - cplx(0.0, eps) * tr.tprime - z * id;

  ResolventSample sample;
  sample.eps = eps;
  sample.z = z;
  sample.r = sys.partialPivLu().solve(id);
  sample.solve_residual = (sys * sample.r - id).cwiseAbs().maxCoeff();
  if (sample.solve_residual > tol)
    throw std::runtime_error(
        "t_epsilon_resolvent: z lies in the spectrum of the deformed operator");
  sample.norm_r = op_norm(sample.r);
  sample.norm_msqrt_r = op_norm((tr.m_half * sample.r).eval());
  sample.norm_msqrt_r_fperp =
      op_norm((tr.m_half * sample.r * tr.fperp_t).eval());

  for (Eigen::Index c = 0; c < d; ++c) {
    const Vector u = sample.r.col(c);
    const double wn = weighted_norm(tr, u);
    const double lhs =
        std::abs(eps) * wn * wn + std::abs(z.imag()) * u.squaredNorm();
    const double im = std::abs((u.adjoint() * (sys * u))(0, 0).imag());
    const double rhs =
        im + std::abs(eps) * tr.c_m * u.norm() * (tr.fperp_t * u).norm();
    sample.apriori_slack = std::max(sample.apriori_slack, lhs - rhs);
  }
  return sample;
}

// Fitted constants of the two resolvent bounds and the window-compression
// bound at one deformation size, maximized over the probe grid:
//   ||r|| * |e eps + Im z|,  ||m^{1/2} r|| * |eps|,  ||m^{1/2} r f_perp|| * |eps|^{1/2}.
struct LemmaConstants {
  double inv_constant{0.0};
  double half_constant{0.0};
  double window_constant{0.0};
};

inline LemmaConstants lemma_constants(const MourreTriple& tr, double eps,
                                      const std::vector<cplx>& zs) {
  if (zs.empty())
    throw std::invalid_argument("lemma_constants: probe grid must be nonempty");
  LemmaConstants out;
  for (const cplx& z : zs) {
    const ResolventSample s = t_epsilon_resolvent(tr, eps, z);
    out.inv_constant = std::max(
        out.inv_constant, s.norm_r * std::abs(tr.e * eps + z.imag()));
    out.half_constant =
        std::max(out.half_constant, s.norm_msqrt_r * std::abs(eps));
    out.window_constant = std::max(
        out.window_constant, s.norm_msqrt_r_fperp * std::sqrt(std::abs(eps)));
  }
  return out;
}

// Largest deformation size in [eps_lo, eps_hi] whose fitted resolvent
// constants stay within the budget on the probe grid, located by bisection.
inline double epsilon_zero(const MourreTriple& tr, const std::vector<cplx>& zs,
                           double budget, double eps_lo = 1e-4,
                           double eps_hi = 1.0, int iterations = 40) {
  if (!(eps_lo > 0.0) || !(eps_hi > eps_lo))
    throw std::invalid_argument("epsilon_zero: need 0 < eps_lo < eps_hi");
  const auto ok = [&](double eps) {
    const LemmaConstants c = lemma_constants(tr, eps, zs);
    return c.inv_constant <= budget && c.half_constant <= budget;
  };
  if (!ok(eps_lo))
    throw std::invalid_argument(
        "epsilon_zero: budget fails already at the smallest deformation");
  if (ok(eps_hi)) return eps_hi;
  double good = eps_lo;
  double bad = eps_hi;
  for (int i = 0; i < iterations; ++i) {
    const double mid = 0.5 * (good + bad);
    (ok(mid) ? good : bad) = mid;
  }
  return good;
}

// ---------------------------------------------------------------------------
// Limiting-absorption probes

struct LapSample {
  double eps{0.0};
  cplx z{0.0};
  double norm_r{0.0};
  double norm_msqrt_r{0.0};
  cplx f_value{0.0};      // <u, r u>
  double window_value{0.0};  // sqrt(eps) * ||r f_perp(t) u||_m
};

struct LapProbeReport {
  std::vector<LapSample> samples;
  double dual_budget{0.0};      // ||u||_{m*}^2 + ||a u||_{m*}^2
  double fitted_c{0.0};         // max |F| / dual_budget
  double window_constant{0.0};  // max window_value / ||u||
  double window_growth{0.0};    // window value at min eps over value at max eps
  double apriori_slack{0.0};
  double weighted_budget{0.0};  // ||u||^2 + ||a u||^2, when a weight is given
  double weighted_c{0.0};       // max |<s u, r s u>| / weighted_budget
  double min_gap{0.0};          // distance from the Re z grid to the spectrum
  bool pass_apriori{false};
  bool pass_window{false};
};

// Evaluate F_z(eps) = <u, r_eps(z) u> over a deformation ladder and a grid of
// spectral parameters on an eigenvalue-free subwindow, and fit the single
// constant bounding |F| by the dual-weighted budget of u and a u.  When a
// weight s is supplied, the reweighted trace <s u, r s u> is fitted against
// the plain budget as well.
inline LapProbeReport lap_probe(const MourreTriple& tr, const Vector& u,
                                const std::vector<cplx>& zs,
                                const std::vector<double>& eps_ladder,
                                double gap_threshold,
                                const Matrix& s = Matrix(),
                                double tol = 1e-10) {
  if (u.size() != static_cast<Eigen::Index>(tr.dim()))
    throw std::invalid_argument("lap_probe: probe vector has the wrong size");
  if (!(u.norm() > 0.0))
    throw std::invalid_argument("lap_probe: probe vector must be nonzero");
  if (zs.empty() || eps_ladder.empty())
    throw std::invalid_argument("lap_probe: grids must be nonempty");
  for (std::size_t i = 0; i < eps_ladder.size(); ++i)
    if (!(eps_ladder[i] > 0.0) ||
        (i > 0 && !(eps_ladder[i] < eps_ladder[i - 1])))
      throw std::invalid_argument(
          "lap_probe: deformation ladder must be positive and decreasing");
  if (!(gap_threshold > 0.0))
    throw std::invalid_argument("lap_probe: gap threshold must be positive");

  LapProbeReport rep;
  rep.min_gap = std::numeric_limits<double>::infinity();
  for (const cplx& z : zs) {
    for (Eigen::Index i = 0; i < tr.t_eig.values.size(); ++i)
      rep.min_gap =
          std::min(rep.min_gap, std::abs(z.real() - tr.t_eig.values(i)));
    if (!(z.imag() > 0.0))
      throw std::invalid_argument("lap_probe: need Im z > 0 on the grid");
  }
  if (rep.min_gap < gap_threshold)
    throw std::invalid_argument(
        "lap_probe: probe frequency too close to an eigenvalue");

  const Vector au = tr.a * u;
  const double du = dual_norm(tr, u);
  const double dau = dual_norm(tr, au);
  rep.dual_budget = du * du + dau * dau;
  Vector su;
  if (s.size() > 0) {
    if (s.rows() != u.size() || s.cols() != u.size())
      throw std::invalid_argument("lap_probe: weight has the wrong shape");
    su = s * u;
    rep.weighted_budget = u.squaredNorm() + au.squaredNorm();
  }

  double max_f = 0.0;
  double max_weighted = 0.0;
  for (const cplx& z : zs) {
    double first_window = -1.0;
    double last_window = 0.0;
    for (double eps : eps_ladder) {
      const ResolventSample rs = t_epsilon_resolvent(tr, eps, z);
      LapSample row;
      row.eps = eps;
      row.z = z;
      row.norm_r = rs.norm_r;
      row.norm_msqrt_r = rs.norm_msqrt_r;
      row.f_value = (u.adjoint() * (rs.r * u))(0, 0);
      row.window_value =
          std::sqrt(eps) * weighted_norm(tr, rs.r * (tr.fperp_t * u));
      rep.samples.push_back(row);
      rep.apriori_slack = std::max(rep.apriori_slack, rs.apriori_slack);
      max_f = std::max(max_f, std::abs(row.f_value));
      rep.window_constant =
          std::max(rep.window_constant, row.window_value / u.norm());
      if (first_window < 0.0) first_window = row.window_value;
      last_window = row.window_value;
      if (su.size() > 0) {
        const cplx fw = (su.adjoint() * (rs.r * su))(0, 0);
        max_weighted = std::max(max_weighted, std::abs(fw));
      }
    }
    if (first_window > 0.0)
      rep.window_growth =
          std::max(rep.window_growth, last_window / first_window);
  }
  rep.fitted_c = max_f / rep.dual_budget;
  if (su.size() > 0) rep.weighted_c = max_weighted / rep.weighted_budget;
  rep.pass_apriori = rep.apriori_slack <= tol;
  // Boundedness, not monotonicity: the tail of the ladder must stay within a
  // small factor of its head, failing only when the compression blows up.
  rep.pass_window = rep.window_growth <= 4.0;
  return rep;
}

// Operator-norm gaps ||r_eps(z) - (t - z)^{-1}|| along a deformation ladder
// at fixed z off the real axis: the deformation is removable in the limit.
inline std::vector<double> resolvent_convergence(
    const MourreTriple& tr, cplx z, const std::vector<double>& eps_ladder) {
  if (z.imag() == 0.0)
    throw std::invalid_argument("resolvent_convergence: need Im z != 0");
  const Eigen::Index d = static_cast<Eigen::Index>(tr.dim());
  const Matrix id = Matrix::Identity(d, d);
  const Matrix plain = (tr.t - z * id).partialPivLu().solve(id);
  std::vector<double> gaps;
  gaps.reserve(eps_ladder.size());
  for (double eps : eps_ladder)
    gaps.push_back(op_norm((t_epsilon_resolvent(tr, eps, z).r - plain).eval()));
  return gaps;
}

// Residual of the first-commutator identity at a ladder of resolvent points:
//   i [(a + zeta)^{-1}, t] - (a + zeta)^{-1} tprime (a + zeta)^{-1},
// which vanishes identically when tprime is the literal commutator i[t, a].
inline std::vector<double> first_commutator_residual(
    const Matrix& t, const Matrix& tprime, const Matrix& a,
    const std::vector<cplx>& zetas) {
  if (t.rows() != t.cols() || a.rows() != a.cols() || t.rows() != a.rows() ||
      tprime.rows() != tprime.cols() || tprime.rows() != t.rows())
    throw std::invalid_argument("first_commutator_residual: shape mismatch");
  const Eigen::Index d = t.rows();
  const Matrix id = Matrix::Identity(d, d);
  std::vector<double> out;
  out.reserve(zetas.size());
  for (const cplx& zeta : zetas) {
    if (zeta.imag() == 0.0)
      throw std::invalid_argument(
          "first_commutator_residual: need Im zeta != 0");
    const Matrix inv = (a + zeta * id).partialPivLu().solve(id);
    const Matrix lhs = cplx(0.0, 1.0) * (inv * t - t * inv);
    out.push_back(op_norm((lhs - inv * tprime * inv).eval()));
  }
  return out;
}

inline std::vector<double> first_commutator_residual(
    const MourreTriple& tr, const std::vector<cplx>& zetas) {
  return first_commutator_residual(tr.t, tr.tprime, tr.a, zetas);
}

}  // namespace pflab::lap
