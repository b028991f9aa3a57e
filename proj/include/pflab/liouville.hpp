// liouville.hpp — doubled-space generators: thermal couplings assembled into a
// standard-form generator with modular symmetry, the gluing onto a single
// signed-frequency field, product thermal vectors, dressing oracles, Weyl
// expectations, time-average diagnostics, and low-temperature certificates.
#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pflab/coupling.hpp"
#include "pflab/hamiltonian.hpp"

namespace pflab::liouville {

using coupling::CouplingProfile;
using coupling::SmallSystem;
using coupling::ThermalPair;
using fock::ModeSet;
using fock::OccBasis;
using fock::SparseOp;

// ---------------------------------------------------------------------------
// Level-space pieces

// Thermal state of the level system alone.  At infinite inverse temperature
// the limit is the normalized projector onto the lowest level(s).
inline Matrix gibbs_small(const SmallSystem& small, double beta) {
  small.validate();
  if (!(beta > 0.0))
    throw std::invalid_argument("gibbs_small: beta must be positive");
  const int nu = small.nu();
  RealVector w = RealVector::Zero(nu);
  if (std::isinf(beta)) {
    for (int j = 0; j < nu; ++j)
      if (small.energies(j) == small.energies(0)) w(j) = 1.0;
  } else {
    for (int j = 0; j < nu; ++j)
      w(j) = std::exp(-beta * (small.energies(j) - small.energies(0)));
  }
  w /= w.sum();
  Matrix rho = Matrix::Zero(nu, nu);
  for (int j = 0; j < nu; ++j) rho(j, j) = w(j);
  return rho;
}

// Purification of the thermal state on the doubled level space: amplitudes
// sqrt(w_a) on the pair states e_a (x) e_a.
inline Vector gibbs_pair_vector(const SmallSystem& small, double beta) {
  const Matrix rho = gibbs_small(small, beta);
  const int nu = small.nu();
  Vector v = Vector::Zero(static_cast<Eigen::Index>(nu) * nu);
  for (int a = 0; a < nu; ++a)
    v(static_cast<Eigen::Index>(a) * nu + a) = std::sqrt(rho(a, a).real());
  return v;
}

// Free level-pair generator K (x) 1 - 1 (x) conj(K) on the doubled level
// space; its spectrum is the difference set of the level energies.
inline SparseOp lp_operator(const SmallSystem& small) {
  small.validate();
  const int nu = small.nu();
  std::vector<fock::Entry> entries;
  for (int a = 0; a < nu; ++a)
    for (int b = 0; b < nu; ++b) {
      const double v = small.energies(a) - small.energies(b);
      if (v != 0.0)
        entries.push_back({static_cast<std::size_t>(a) * nu + b,
                           static_cast<std::size_t>(a) * nu + b, v});
    }
  const std::string id = "pair[nu=" + std::to_string(nu) + "]";
  return fock::make_sparse(static_cast<std::size_t>(nu) * nu,
                           static_cast<std::size_t>(nu) * nu,
                           std::move(entries), id, id, true);
}

// ---------------------------------------------------------------------------
// Doubled system

// Assembled doubled-space generator.  The field factor carries the left copy
// of every mode followed by the right copy under one joint occupancy cutoff,
// so the exchange of the two copies acts as a basis permutation.
struct DoubledSystem {
  SmallSystem small;
  ModeSet modes;              // physical modes, positive frequencies
  CouplingProfile profile;
  std::vector<double> betas;  // inverse temperature per reservoir tag
  int n_total_max{0};
  int per_mode_cap{-1};

  ModeSet doubled_modes;      // left block then right block
  OccBasis basis;
  std::vector<Matrix> g;      // sampled physical couplings
  std::vector<ThermalPair> pairs;
  SparseOp l0;                // level-pair generator plus signed free field
  SparseOp wbeta;             // interaction part
  SparseOp lbeta;             // l0 + wbeta
  SparseOp n_field;           // joint occupancy over both copies
  SparseOp exchange;          // copy-swap permutation (linear part of the
                              // modular conjugation; the full map conjugates
                              // entries as well)
  Eigensystem eig;            // of lbeta, ascending
  double modular_defect{0.0}; // max entrywise defect of the sign flip
  double mirror_defect{0.0};  // max |eig_k + eig_{dim-1-k}|
  std::string product_id;

  std::size_t dim() const { return lbeta.rows; }
  int nu() const { return small.nu(); }
};

namespace detail {

// Permutation on the product index that swaps the two level slots and the
// two mode blocks.  Defined whenever the joint cutoff is copy-symmetric,
// which the shared occupancy bound guarantees.
inline std::vector<std::size_t> copy_swap_permutation(int nu,
                                                      const OccBasis& basis) {
  const std::size_t dimf = basis.dim();
  const std::size_t m = basis.mode_count() / 2;
  std::vector<std::size_t> perm(static_cast<std::size_t>(nu) * nu * dimf);
  std::vector<int> swapped;
  for (std::size_t i = 0; i < dimf; ++i) {
    swapped = basis.states[i];
    for (std::size_t j = 0; j < m; ++j)
      std::swap(swapped[j], swapped[j + m]);
    const std::ptrdiff_t t = basis.index_of(swapped);
    if (t < 0)
      throw std::logic_error(
          "copy_swap_permutation: cutoff is not copy-symmetric");
    for (int a = 0; a < nu; ++a)
      for (int b = 0; b < nu; ++b) {
        const std::size_t s = static_cast<std::size_t>(a) * nu + b;
        const std::size_t sw = static_cast<std::size_t>(b) * nu + a;
        perm[s * dimf + i] = sw * dimf + static_cast<std::size_t>(t);
      }
  }
  return perm;
}

// Max entrywise defect of perm . conj(op) . perm + op, evaluated on the
// stored entries; zero exactly when the antilinear copy-swap flips the sign.
inline double modular_sign_defect(const SparseOp& op,
                                  const std::vector<std::size_t>& perm) {
  Matrix dense = op.to_dense();
  double defect = 0.0;
  for (Eigen::Index r = 0; r < dense.rows(); ++r)
    for (Eigen::Index c = 0; c < dense.cols(); ++c) {
      const cplx moved =
          std::conj(dense(static_cast<Eigen::Index>(
                              perm[static_cast<std::size_t>(r)]),
                          static_cast<Eigen::Index>(
                              perm[static_cast<std::size_t>(c)])));
      defect = std::max(defect, std::abs(moved + dense(r, c)));
    }
  return defect;
}

inline double spectral_mirror_defect(const Eigensystem& eig) {
  double defect = 0.0;
  const Eigen::Index n = eig.values.size();
  for (Eigen::Index k = 0; k < n; ++k)
    defect = std::max(defect, std::abs(eig.values(k) + eig.values(n - 1 - k)));
  return defect;
}

}  // namespace detail

inline DoubledSystem assemble_liouvillean(const SmallSystem& small,
                                          const CouplingProfile& profile,
                                          const ModeSet& modes,
                                          std::vector<double> betas,
                                          int n_total_max,
                                          int per_mode_cap = -1) {
  small.validate();
  modes.validate();
  if (!modes.all_positive())
    throw std::invalid_argument(
        "assemble_liouvillean: modes must have positive frequencies");
  for (double beta : betas)
    if (!(beta > 0.0))
      throw std::invalid_argument(
          "assemble_liouvillean: inverse temperatures must be positive");

  if (per_mode_cap < 0) per_mode_cap = n_total_max;

  DoubledSystem sys;
  sys.small = small;
  sys.modes = modes;
  sys.profile = profile;
  sys.betas = std::move(betas);
  sys.n_total_max = n_total_max;
  sys.per_mode_cap = per_mode_cap;

  sys.g = coupling::sample_coupling(profile, modes);
  if (!sys.g.empty() && sys.g[0].rows() != small.nu())
    throw std::invalid_argument(
        "assemble_liouvillean: coupling dimension does not match the levels");
  sys.pairs = coupling::thermal_couplings(profile, modes, sys.betas);

  // Right-block slots mirror the reservoirs; shifted tags keep each
  // reservoir's frequency list strictly increasing after the doubling.
  int tag_shift = 0;
  for (const auto& md : modes.modes)
    tag_shift = std::max(tag_shift, md.reservoir + 1);
  const std::size_t m = modes.size();
  sys.doubled_modes.modes.reserve(2 * m);
  for (const auto& md : modes.modes) sys.doubled_modes.modes.push_back(md);
  for (const auto& md : modes.modes) {
    auto mirrored = md;
    mirrored.reservoir += tag_shift;
    sys.doubled_modes.modes.push_back(mirrored);
  }
  sys.basis = fock::build_basis(sys.doubled_modes, n_total_max, per_mode_cap);

  const int nu = small.nu();
  const std::size_t dim =
      static_cast<std::size_t>(nu) * nu * sys.basis.dim();
  if (dim > 200000)
    throw fock::dimension_cap_error(
        "assemble_liouvillean: doubled dimension " + std::to_string(dim) +
        " exceeds the 200000 cap");
  sys.product_id =
      "doubled[nu=" + std::to_string(nu) + ";" + sys.basis.id + "]";

  // Free part: level-pair differences plus the signed free field.  The two
  // copies are assembled as separate one-sided sums and subtracted, so the
  // copy swap negates every diagonal entry exactly.
  const Matrix k = small.hamiltonian();
  const Matrix id_small = Matrix::Identity(nu, nu);
  const Matrix k_pair =
      kron(k, id_small) - kron(id_small, k.conjugate());
  const Eigen::Index mm = static_cast<Eigen::Index>(2 * m);
  Matrix left_diag = Matrix::Zero(mm, mm);
  Matrix right_diag = Matrix::Zero(mm, mm);
  for (std::size_t j = 0; j < m; ++j) {
    left_diag(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j)) =
        modes.omega(j);
    right_diag(static_cast<Eigen::Index>(m + j),
               static_cast<Eigen::Index>(m + j)) = modes.omega(j);
  }
  const SparseOp field_free =
      fock::dgamma(sys.basis, left_diag) - fock::dgamma(sys.basis, right_diag);
  const SparseOp lp_lift =
      hamiltonian::detail::product_op(k_pair,
                                      fock::identity_op(sys.basis.dim(), sys.basis.id),
                                      sys.product_id);
  sys.l0 = fock::as_hermitian(
      lp_lift + hamiltonian::detail::product_op(
                    Matrix::Identity(nu * nu, nu * nu), field_free,
                    sys.product_id));

  std::vector<Matrix> forms;
  forms.reserve(2 * m);
  for (std::size_t j = 0; j < m; ++j) forms.push_back(sys.pairs[j].left);
  for (std::size_t j = 0; j < m; ++j) forms.push_back(-sys.pairs[j].right);
  sys.wbeta = hamiltonian::field_term(sys.basis, forms, sys.product_id);
  sys.lbeta = fock::as_hermitian(sys.l0 + sys.wbeta);
  sys.n_field = fock::as_hermitian(hamiltonian::detail::product_op(
      Matrix::Identity(nu * nu, nu * nu), fock::number_op(sys.basis),
      sys.product_id));

  const std::vector<std::size_t> perm =
      detail::copy_swap_permutation(nu, sys.basis);
  std::vector<fock::Entry> xentries;
  xentries.reserve(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i)
    xentries.push_back({perm[i], i, 1.0});
  sys.exchange = fock::make_sparse(dim, dim, std::move(xentries),
                                   sys.product_id, sys.product_id);

  sys.modular_defect = detail::modular_sign_defect(sys.lbeta, perm);
  if (sys.modular_defect != 0.0)
    throw std::logic_error(
        "assemble_liouvillean: copy-swap conjugation failed to flip the sign "
        "exactly");

  sys.eig = eig_hermitian(sys.lbeta.to_dense());
  sys.mirror_defect = detail::spectral_mirror_defect(sys.eig);
  return sys;
}

inline DoubledSystem assemble_liouvillean(const SmallSystem& small,
                                          const CouplingProfile& profile,
                                          const ModeSet& modes, double beta,
                                          int n_total_max,
                                          int per_mode_cap = -1) {
  int max_res = 0;
  for (const auto& md : modes.modes) max_res = std::max(max_res, md.reservoir);
  return assemble_liouvillean(small, profile, modes,
                              std::vector<double>(max_res + 1, beta),
                              n_total_max, per_mode_cap);
}

// ---------------------------------------------------------------------------
// Spectral table for export

struct DoubledRow {
  int index{0};
  double eigenvalue{0.0};
  double mirror_defect{0.0};
  double n_expect{0.0};
};

inline std::vector<DoubledRow> doubled_spectral_table(const DoubledSystem& sys) {
  const Matrix nd = sys.n_field.to_dense();
  const Eigen::Index n = sys.eig.values.size();
  std::vector<DoubledRow> rows;
  rows.reserve(static_cast<std::size_t>(n));
  for (Eigen::Index k = 0; k < n; ++k) {
    DoubledRow row;
    row.index = static_cast<int>(k);
    row.eigenvalue = sys.eig.values(k);
    row.mirror_defect =
        std::abs(sys.eig.values(k) + sys.eig.values(n - 1 - k));
    const Vector v = sys.eig.vectors.col(k);
    row.n_expect = (v.adjoint() * nd * v).value().real();
    rows.push_back(row);
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Interaction norm bound

struct WbetaRow {
  double lhs{0.0};
  double rhs{0.0};
  double ratio{0.0};
};

struct WbetaReport {
  double kappa{0.0};        // thermal coupling constant in the bound
  std::vector<WbetaRow> rows;
  double max_ratio{0.0};
  bool all_hold{true};
};

// Relative bound of the interaction against the joint occupancy: for every
// probe state,  ||W psi|| <= kappa (2^{3/2} ||psi|| + 2^{1/2} ||sqrt(N) psi||)
// with kappa = ||G|| + 2 beta^{-1/2} ||G / sqrt(|omega|)||.
inline WbetaReport wbeta_bound_check(const DoubledSystem& sys, int count,
                                     std::uint64_t seed) {
  WbetaReport rep;
  double norm2 = 0.0;
  double over2 = 0.0;
  double beta_min = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < sys.modes.size(); ++j) {
    const double gj = op_norm(sys.g[j]);
    norm2 += gj * gj;
    over2 += gj * gj / sys.modes.omega(j);
    beta_min = std::min(
        beta_min,
        sys.betas[static_cast<std::size_t>(sys.modes.modes[j].reservoir)]);
  }
  const double thermal =
      std::isinf(beta_min) ? 0.0 : 2.0 / std::sqrt(beta_min);
  rep.kappa = std::sqrt(norm2) + thermal * std::sqrt(over2);

  const std::size_t dim = sys.dim();
  const std::size_t dimf = sys.basis.dim();
  RealVector sqrt_n(static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < dim; ++i)
    sqrt_n(static_cast<Eigen::Index>(i)) =
        std::sqrt(double(sys.basis.total(i % dimf)));

  auto probe = [&](const Vector& psi) {
    WbetaRow row;
    row.lhs = sys.wbeta.apply(psi).norm();
    const double root_n = (sqrt_n.array() * psi.array().abs()).matrix().norm();
    row.rhs = rep.kappa * (2.0 * std::sqrt(2.0) * psi.norm() +
                           std::sqrt(2.0) * root_n);
    row.ratio = (row.rhs > 0.0) ? row.lhs / row.rhs
                                : (row.lhs > 0.0 ? std::numeric_limits<double>::infinity()
                                                 : 0.0);
    rep.rows.push_back(row);
    rep.max_ratio = std::max(rep.max_ratio, row.ratio);
  };

  Vector vac = Vector::Zero(static_cast<Eigen::Index>(dim));
  std::vector<int> zeros(sys.basis.mode_count(), 0);
  vac(static_cast<Eigen::Index>(sys.basis.index_of(zeros))) = 1.0;
  probe(vac);
  for (int i = 0; i < count; ++i)
    probe(random_matrix(dim, 1, seed + static_cast<std::uint64_t>(i)).col(0));
  rep.all_hold = rep.max_ratio <= 1.0 + 1e-12;
  return rep;
}

// ---------------------------------------------------------------------------
// Gluing onto a single signed-frequency field

// The glued generator acts on one field over the signed frequency nodes; it
// is carried by a bundle so every single-field diagnostic applies verbatim.
struct GluedSystem {
  coupling::GluedCoupling gluing;
  hamiltonian::HamiltonianBundle bundle;
  SparseOp u;                   // doubled index -> glued index permutation
  double transport_gap{0.0};    // max |U L U* - glued generator|
  double number_gap{0.0};       // same for the occupancy operator
};

inline GluedSystem glue(const DoubledSystem& sys) {
  GluedSystem gs;
  gs.gluing = coupling::glued_coupling(sys.profile, sys.modes, sys.betas);
  const int nu = sys.nu();
  const std::size_t m = sys.modes.size();

  hamiltonian::HamiltonianBundle& b = gs.bundle;
  b.modes = gs.gluing.modes;
  b.basis = fock::build_basis(b.modes, sys.n_total_max, sys.per_mode_cap);
  b.g = gs.gluing.form;
  RealVector diffs(static_cast<Eigen::Index>(nu) * nu);
  for (int a = 0; a < nu; ++a)
    for (int bb = 0; bb < nu; ++bb)
      diffs(static_cast<Eigen::Index>(a) * nu + bb) =
          sys.small.energies(a) - sys.small.energies(bb);
  std::sort(diffs.data(), diffs.data() + diffs.size());
  b.small.energies = diffs;
  b.product_id =
      "glued[nu=" + std::to_string(nu) + ";" + b.basis.id + "]";

  const Matrix k = sys.small.hamiltonian();
  const Matrix id_small = Matrix::Identity(nu, nu);
  const Matrix k_pair =
      kron(k, id_small) - kron(id_small, k.conjugate());
  const Eigen::Index nodes = static_cast<Eigen::Index>(b.modes.size());
  Matrix signed_diag = Matrix::Zero(nodes, nodes);
  for (Eigen::Index j = 0; j < nodes; ++j)
    signed_diag(j, j) = b.modes.omega(static_cast<std::size_t>(j));
  b.h0 = fock::as_hermitian(
      hamiltonian::detail::product_op(
          k_pair, fock::identity_op(b.basis.dim(), b.basis.id), b.product_id) +
      hamiltonian::detail::product_op(Matrix::Identity(nu * nu, nu * nu),
                                      fock::dgamma(b.basis, signed_diag),
                                      b.product_id));
  b.phi = hamiltonian::field_term(b.basis, b.g, b.product_id);
  b.h = fock::as_hermitian(b.h0 + b.phi);
  b.number = fock::as_hermitian(hamiltonian::detail::product_op(
      Matrix::Identity(nu * nu, nu * nu), fock::number_op(b.basis),
      b.product_id));
  b.eig = eig_hermitian(b.h.to_dense());
  b.sigma = b.eig.values(0);

  // Node relabeling: left copies to the positive nodes, right copies to the
  // mirrored negative nodes; levels are untouched.
  const std::size_t dimf = sys.basis.dim();
  std::vector<std::size_t> field_map(dimf);
  std::vector<int> relabeled(b.modes.size(), 0);
  for (std::size_t i = 0; i < dimf; ++i) {
    const std::vector<int>& state = sys.basis.states[i];
    std::fill(relabeled.begin(), relabeled.end(), 0);
    for (std::size_t j = 0; j < m; ++j) {
      relabeled[static_cast<std::size_t>(gs.gluing.positive_index[j])] =
          state[j];
      relabeled[static_cast<std::size_t>(gs.gluing.negative_index[j])] =
          state[j + m];
    }
    const std::ptrdiff_t t = b.basis.index_of(relabeled);
    if (t < 0)
      throw std::logic_error("glue: node relabeling left the glued basis");
    field_map[i] = static_cast<std::size_t>(t);
  }
  const std::size_t dim = sys.dim();
  std::vector<fock::Entry> uentries;
  uentries.reserve(dim);
  std::vector<std::size_t> full_map(dim);
  for (std::size_t s = 0; s < static_cast<std::size_t>(nu) * nu; ++s)
    for (std::size_t i = 0; i < dimf; ++i) {
      full_map[s * dimf + i] = s * dimf + field_map[i];
      uentries.push_back({s * dimf + field_map[i], s * dimf + i, 1.0});
    }
  gs.u = fock::make_sparse(dim, dim, std::move(uentries), b.product_id,
                           sys.product_id);

  const Matrix ld = sys.lbeta.to_dense();
  const Matrix nd = sys.n_field.to_dense();
  const Matrix gd = b.h.to_dense();
  const Matrix gnd = b.number.to_dense();
  for (Eigen::Index r = 0; r < ld.rows(); ++r)
    for (Eigen::Index c = 0; c < ld.cols(); ++c) {
      const Eigen::Index rr =
          static_cast<Eigen::Index>(full_map[static_cast<std::size_t>(r)]);
      const Eigen::Index cc =
          static_cast<Eigen::Index>(full_map[static_cast<std::size_t>(c)]);
      gs.transport_gap =
          std::max(gs.transport_gap, std::abs(gd(rr, cc) - ld(r, c)));
      gs.number_gap =
          std::max(gs.number_gap, std::abs(gnd(rr, cc) - nd(r, c)));
    }
  return gs;
}

// Single-field diagnostics applied to the glued generator.
inline hamiltonian::CommutatorReport liouvillean_commutator(
    const GluedSystem& gs, const conjugate::ConjugateSpec& spec) {
  return hamiltonian::commutator_observable(gs.bundle, spec);
}

inline hamiltonian::CertificateReport weak_coupling_liouville_certificate(
    const GluedSystem& gs, const conjugate::ConjugateSpec& spec,
    double tol = 1e-10) {
  return hamiltonian::weak_coupling_certificate(gs.bundle, spec, tol);
}

inline hamiltonian::PullthroughReport pullthrough_residual_glued(
    const GluedSystem& gs, cplx z, const Vector& psi,
    const std::vector<std::size_t>& js = {}) {
  return hamiltonian::pullthrough_residual(gs.bundle, z, psi, js);
}

// Nearest single-quantum probe: the best residual of (L - lambda) over the
// product states with one quantum on a single node, a localization gauge for
// points inside the essential branch.
struct HvzReport {
  std::vector<double> residuals;
  double best_residual{0.0};
  std::size_t best_node{0};
};

inline HvzReport hvz_probe(const GluedSystem& gs, double lambda) {
  const hamiltonian::HamiltonianBundle& b = gs.bundle;
  const std::size_t dimf = b.basis.dim();
  HvzReport rep;
  rep.best_residual = std::numeric_limits<double>::infinity();
  std::vector<int> tuple(b.basis.mode_count(), 0);
  for (std::size_t j = 0; j < b.basis.mode_count(); ++j) {
    std::fill(tuple.begin(), tuple.end(), 0);
    tuple[j] = 1;
    const std::ptrdiff_t t = b.basis.index_of(tuple);
    if (t < 0) continue;
    Vector psi = Vector::Zero(static_cast<Eigen::Index>(b.dim()));
    psi(static_cast<Eigen::Index>(t)) = 1.0;  // level pair (0,0)
    const double res = (b.h.apply(psi) - lambda * psi).norm();
    rep.residuals.push_back(res);
    if (res < rep.best_residual) {
      rep.best_residual = res;
      rep.best_node = j;
    }
  }
  if (rep.residuals.empty())
    throw std::invalid_argument("hvz_probe: no single-quantum state available");
  return rep;
}

// ---------------------------------------------------------------------------
// Product thermal vector

struct KmsReport {
  Vector state;              // normalized candidate with the smaller residual
  Vector reference;          // level purification (x) field vacuum
  double residual_full{0.0}; // exponent beta
  double residual_half{0.0}; // exponent beta / 2
  double residual{0.0};
  double exponent{0.0};
  bool half_exponent{false};
  double overlap{0.0};       // |<reference, state>|
};

// Candidate invariant vector: the damped product state under both exponent
// conventions, keeping whichever leaves the smaller generator residual.  The
// damping uses the free generator plus the left half of the interaction.
inline KmsReport kms_vector(const DoubledSystem& sys) {
  const double beta = sys.betas.empty() ? 0.0 : sys.betas[0];
  if (std::isinf(beta))
    throw std::invalid_argument(
        "kms_vector: needs a finite inverse temperature");
  KmsReport rep;
  const std::size_t dimf = sys.basis.dim();
  const Vector pair = gibbs_pair_vector(sys.small, beta);
  rep.reference = Vector::Zero(static_cast<Eigen::Index>(sys.dim()));
  std::vector<int> zeros(sys.basis.mode_count(), 0);
  const std::size_t vac = static_cast<std::size_t>(sys.basis.index_of(zeros));
  for (Eigen::Index s = 0; s < pair.size(); ++s)
    rep.reference(s * static_cast<Eigen::Index>(dimf) +
                  static_cast<Eigen::Index>(vac)) = pair(s);

  if (sys.wbeta.max_abs() == 0.0) {
    // Free generator: the product state is invariant outright, and the
    // damping only rescales it.
    rep.state = rep.reference;
    rep.residual_full = sys.lbeta.apply(rep.state).norm();
    rep.residual_half = rep.residual_full;
    rep.residual = rep.residual_full;
    rep.exponent = 0.5 * beta;
    rep.half_exponent = true;
    rep.overlap = 1.0;
    return rep;
  }

  // Left representation of the interaction: thermal weights on both slot
  // blocks, acting on the first level factor alone.  Subtracting its
  // conjugation by the exchange symmetry recovers the assembled interaction.
  const std::size_t m = sys.modes.size();
  const Matrix id_small = Matrix::Identity(sys.nu(), sys.nu());
  std::vector<Matrix> left_forms(2 * m);
  for (std::size_t j = 0; j < m; ++j) {
    const double rho = sys.pairs[j].rho;
    left_forms[j] = std::sqrt(1.0 + rho) * kron(sys.g[j], id_small);
    left_forms[m + j] = std::sqrt(rho) * kron(sys.g[j], id_small);
  }
  const SparseOp damping_op = fock::as_hermitian(
      sys.l0 + hamiltonian::field_term(sys.basis, left_forms, sys.product_id));
  const Eigensystem des = eig_hermitian(damping_op.to_dense());
  const double floor = des.values(0);

  auto candidate = [&](double s) {
    Vector c = des.vectors.adjoint() * rep.reference;
    for (Eigen::Index k = 0; k < c.size(); ++k)
      c(k) *= std::exp(-s * (des.values(k) - floor));
    Vector v = des.vectors * c;
    const double nrm = v.norm();
    if (!(nrm > 0.0))
      throw std::runtime_error("kms_vector: damped candidate vanished");
    return (v / nrm).eval();
  };

  const Vector full = candidate(beta);
  const Vector half = candidate(0.5 * beta);
  rep.residual_full = sys.lbeta.apply(full).norm();
  rep.residual_half = sys.lbeta.apply(half).norm();
  rep.half_exponent = rep.residual_half <= rep.residual_full;
  rep.state = rep.half_exponent ? half : full;
  rep.residual = rep.half_exponent ? rep.residual_half : rep.residual_full;
  rep.exponent = rep.half_exponent ? 0.5 * beta : beta;
  const cplx ov = rep.reference.dot(rep.state);
  if (std::abs(ov) > 0.0) rep.state *= std::conj(ov) / std::abs(ov);
  rep.overlap = std::abs(ov);
  return rep;
}

// ---------------------------------------------------------------------------
// Exactly solvable single-level oracle

struct VanHoveReport {
  double shift_closed{0.0};   // -sum |g_j|^2 / (2 omega_j)
  double shift_dense{0.0};    // ground energy drop of the assembled bundle
  double shift_gap{0.0};
  double dressing_gap{0.0};   // dressed-generator defect on the fixed window
  double dressing_gap_full{0.0};
  int observation_cap{0};
};

// With a single level the coupled generator is a displaced free field: the
// level energy shifts by the closed-form constant while the doubled
// generator is unitarily free, witnessed by the explicit dressing.  The
// dressing defect is measured on a fixed low-occupancy window so that
// raising the cutoff exhibits the decay instead of moving the boundary.
inline VanHoveReport vanhove_oracle(const DoubledSystem& sys,
                                    int observation_cap = 2) {
  if (sys.nu() != 1)
    throw std::invalid_argument("vanhove_oracle: needs a single-level system");
  VanHoveReport rep;
  for (std::size_t j = 0; j < sys.modes.size(); ++j)
    rep.shift_closed -=
        std::norm(sys.g[j](0, 0)) / (2.0 * sys.modes.omega(j));
  const hamiltonian::HamiltonianBundle hb = hamiltonian::assemble_hamiltonian(
      sys.small, sys.modes, sys.g, sys.n_total_max, sys.per_mode_cap);
  rep.shift_dense = hb.sigma - sys.small.energies(0);
  rep.shift_gap = std::abs(rep.shift_dense - rep.shift_closed);

  const std::size_t m = sys.modes.size();
  std::vector<Matrix> dressing;
  dressing.reserve(2 * m);
  const cplx iunit(0.0, 1.0);
  for (std::size_t j = 0; j < m; ++j)
    dressing.push_back(iunit / sys.modes.omega(j) * sys.pairs[j].left);
  for (std::size_t j = 0; j < m; ++j)
    dressing.push_back(iunit / sys.modes.omega(j) * sys.pairs[j].right);
  const Matrix x =
      hamiltonian::field_term(sys.basis, dressing, sys.product_id).to_dense();
  const Matrix v = apply_spectral(
      x, [](double lam) { return std::exp(cplx(0.0, lam)); });
  const Matrix dressed = v.adjoint() * sys.lbeta.to_dense() * v;
  const Matrix gap = dressed - sys.l0.to_dense();
  rep.dressing_gap_full = gap.cwiseAbs().maxCoeff();
  rep.observation_cap = std::min(observation_cap, sys.basis.n_total_max - 1);
  const int margin = rep.observation_cap;
  for (Eigen::Index r = 0; r < gap.rows(); ++r)
    for (Eigen::Index c = 0; c < gap.cols(); ++c)
      if (sys.basis.total(static_cast<std::size_t>(r)) <= margin &&
          sys.basis.total(static_cast<std::size_t>(c)) <= margin)
        rep.dressing_gap = std::max(rep.dressing_gap, std::abs(gap(r, c)));
  return rep;
}

// Ground-state occupancy along a sequence of mode grids; grows without bound
// when the infrared weight of the coupling is not square-summable against
// 1/omega, shrinking truncation error notwithstanding.
inline std::vector<double> ir_number_trend(const SmallSystem& small,
                                           const CouplingProfile& profile,
                                           const std::vector<ModeSet>& grids,
                                           int n_total_max,
                                           int per_mode_cap = -1) {
  std::vector<double> out;
  out.reserve(grids.size());
  for (const auto& grid : grids) {
    const hamiltonian::HamiltonianBundle hb = hamiltonian::assemble_hamiltonian(
        small, grid, profile, n_total_max, per_mode_cap);
    const Vector v = hb.eig.vectors.col(0);
    out.push_back((v.adjoint() * hb.number.to_dense() * v).value().real());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Thermal Weyl expectation

struct WeylReport {
  cplx value{0.0};
  double closed_form{0.0};
  double gap{0.0};
  double commutation_defect{0.0};
  int commutation_margin{0};
};

// Expectation of the left thermal Weyl operator in the doubled vacuum versus
// the closed form exp(-||sqrt(1+2 rho) f||^2 / 4), plus the left-right
// commutation defect well below the cutoff.
inline WeylReport weyl_expectation(const ModeSet& modes,
                                   const std::vector<double>& betas,
                                   const Vector& f, int n_total_max,
                                   int per_mode_cap = -1) {
  modes.validate();
  if (!modes.all_positive())
    throw std::invalid_argument(
        "weyl_expectation: modes must have positive frequencies");
  if (static_cast<std::size_t>(f.size()) != modes.size())
    throw std::invalid_argument(
        "weyl_expectation: one amplitude per mode required");
  if (per_mode_cap < 0) per_mode_cap = n_total_max;
  int tag_shift = 0;
  for (const auto& md : modes.modes)
    tag_shift = std::max(tag_shift, md.reservoir + 1);
  const std::size_t m = modes.size();
  ModeSet doubled;
  doubled.modes.reserve(2 * m);
  for (const auto& md : modes.modes) doubled.modes.push_back(md);
  for (const auto& md : modes.modes) {
    auto mirrored = md;
    mirrored.reservoir += tag_shift;
    doubled.modes.push_back(mirrored);
  }
  const OccBasis basis = fock::build_basis(doubled, n_total_max, per_mode_cap);

  std::vector<double> rho(m);
  double exponent = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    const std::size_t res =
        static_cast<std::size_t>(modes.modes[j].reservoir);
    if (res >= betas.size())
      throw std::invalid_argument(
          "weyl_expectation: missing beta for a reservoir tag");
    rho[j] = coupling::planck_density(betas[res], modes.omega(j));
    exponent += (1.0 + 2.0 * rho[j]) *
                std::norm(f(static_cast<Eigen::Index>(j)));
  }
  if (f.norm() == 0.0) {
    // Zero amplitude: the Weyl operator is the identity outright.
    WeylReport rep;
    rep.value = 1.0;
    rep.closed_form = 1.0;
    rep.commutation_margin = std::max(0, n_total_max / 2);
    return rep;
  }

  auto left_field = [&](const Vector& amp) {
    std::vector<Matrix> forms(2 * m, Matrix::Zero(1, 1));
    for (std::size_t j = 0; j < m; ++j) {
      forms[j](0, 0) = std::sqrt(1.0 + rho[j]) * amp(static_cast<Eigen::Index>(j));
      forms[m + j](0, 0) =
          std::sqrt(rho[j]) * std::conj(amp(static_cast<Eigen::Index>(j)));
    }
    return hamiltonian::field_term(basis, forms, basis.id).to_dense();
  };
  auto right_field = [&](const Vector& amp) {
    std::vector<Matrix> forms(2 * m, Matrix::Zero(1, 1));
    for (std::size_t j = 0; j < m; ++j) {
      forms[j](0, 0) = std::sqrt(rho[j]) * amp(static_cast<Eigen::Index>(j));
      forms[m + j](0, 0) =
          std::sqrt(1.0 + rho[j]) * std::conj(amp(static_cast<Eigen::Index>(j)));
    }
    return hamiltonian::field_term(basis, forms, basis.id).to_dense();
  };
  auto weyl = [&](const Matrix& field) {
    return apply_spectral(
        field, [](double lam) { return std::exp(cplx(0.0, lam)); });
  };

  WeylReport rep;
  const Matrix wl = weyl(left_field(f));
  std::vector<int> zeros(basis.mode_count(), 0);
  const Eigen::Index vac =
      static_cast<Eigen::Index>(basis.index_of(zeros));
  rep.value = wl(vac, vac);
  rep.closed_form = std::exp(-exponent / 4.0);
  rep.gap = std::abs(rep.value - rep.closed_form);

  const Matrix wr = weyl(right_field((cplx(0.0, 1.0) * f).eval()));
  const Matrix comm = wl * wr - wr * wl;
  rep.commutation_margin = std::max(0, n_total_max / 2);
  for (Eigen::Index r = 0; r < comm.rows(); ++r)
    for (Eigen::Index c = 0; c < comm.cols(); ++c)
      if (basis.total(static_cast<std::size_t>(r)) <= rep.commutation_margin &&
          basis.total(static_cast<std::size_t>(c)) <= rep.commutation_margin)
        rep.commutation_defect =
            std::max(rep.commutation_defect, std::abs(comm(r, c)));
  return rep;
}

// ---------------------------------------------------------------------------
// Time-average diagnostics

struct KoopmanReport {
  std::vector<cplx> samples;    // correlation on the requested grid
  cplx mean_finite{0.0};
  cplx mean_limit{0.0};         // eigenvalue-coincidence sum
  int kernel_dim{0};
  double kernel_gap{0.0};       // smallest nonkernel |eigenvalue|
  bool kernel_simple{false};
  double equilibrium{0.0};      // kernel-state expectation when simple
  double equilibrium_gap{0.0};
};

// Heisenberg correlation <psi, e^{itL} A e^{-itL} psi>: grid samples, grid
// average, and the infinite-time limit collapsed onto eigenvalue
// coincidences.
inline KoopmanReport koopman_diagnostics(const DoubledSystem& sys,
                                         const Matrix& a, const Vector& psi,
                                         const std::vector<double>& times,
                                         double cluster_tol = 1e-9) {
  if (a.rows() != static_cast<Eigen::Index>(sys.dim()) ||
      a.cols() != static_cast<Eigen::Index>(sys.dim()))
    throw std::invalid_argument("koopman_diagnostics: observable shape mismatch");
  if (psi.size() != static_cast<Eigen::Index>(sys.dim()))
    throw std::invalid_argument("koopman_diagnostics: state dimension mismatch");
  if (times.empty())
    throw std::invalid_argument("koopman_diagnostics: empty time grid");

  KoopmanReport rep;
  const Matrix ar = sys.eig.vectors.adjoint() * a * sys.eig.vectors;
  const Vector c = sys.eig.vectors.adjoint() * psi;
  const Eigen::Index n = c.size();

  for (double t : times) {
    Vector d(n);
    for (Eigen::Index k = 0; k < n; ++k)
      d(k) = std::exp(cplx(0.0, -sys.eig.values(k) * t)) * c(k);
    rep.samples.push_back((d.adjoint() * ar * d).value());
    rep.mean_finite += rep.samples.back();
  }
  rep.mean_finite /= double(times.size());

  const double scale =
      std::max(std::abs(sys.eig.values(0)), std::abs(sys.eig.values(n - 1)));
  const double tol = cluster_tol * std::max(1.0, scale);
  Eigen::Index start = 0;
  while (start < n) {
    Eigen::Index stop = start + 1;
    while (stop < n && sys.eig.values(stop) - sys.eig.values(stop - 1) <= tol)
      ++stop;
    for (Eigen::Index k = start; k < stop; ++k)
      for (Eigen::Index l = start; l < stop; ++l)
        rep.mean_limit += std::conj(c(k)) * ar(k, l) * c(l);
    start = stop;
  }

  const double kernel_tol = 1e-8 * std::max(1.0, scale);
  rep.kernel_gap = std::numeric_limits<double>::infinity();
  Eigen::Index kernel_index = -1;
  for (Eigen::Index k = 0; k < n; ++k) {
    const double mag = std::abs(sys.eig.values(k));
    if (mag <= kernel_tol) {
      ++rep.kernel_dim;
      kernel_index = k;
    } else {
      rep.kernel_gap = std::min(rep.kernel_gap, mag);
    }
  }
  rep.kernel_simple = rep.kernel_dim == 1;
  if (rep.kernel_simple) {
    const Vector w = sys.eig.vectors.col(kernel_index);
    rep.equilibrium = (w.adjoint() * a * w).value().real();
    rep.equilibrium_gap = std::abs(rep.mean_limit - cplx(rep.equilibrium));
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Low-temperature certificates

// Compression of the commutator surrogate onto the eigenvectors with
// |eigenvalue| above a threshold, witnessed against a requested rate.
inline hamiltonian::CertificateReport absolute_high_energy_certificate(
    const hamiltonian::HamiltonianBundle& b,
    const conjugate::ConjugateSpec& spec, double e0, double rate,
    double tol = 1e-10) {
  spec.validate();
  hamiltonian::CertificateReport rep;
  rep.name = "absolute-high-energy";
  rep.window_center = e0;
  rep.threshold = rate;
  rep.tol = tol;
  std::vector<Eigen::Index> idx;
  for (Eigen::Index i = 0; i < b.eig.values.size(); ++i)
    if (std::abs(b.eig.values(i)) > e0) idx.push_back(i);
  if (idx.empty()) {
    rep.vacuous = true;
    rep.pass = true;
    rep.witnessed = rate;
    rep.reported = rate;
    return rep;
  }
  Matrix v(b.eig.vectors.rows(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k)
    v.col(static_cast<Eigen::Index>(k)) = b.eig.vectors.col(idx[k]);
  rep.dimension = static_cast<int>(idx.size());
  const Matrix surrogate = hamiltonian::detail::mourre_surrogate(b, spec);
  rep.witnessed = lambda_min((v.adjoint() * surrogate * v).eval());
  rep.reported = rep.witnessed;
  rep.pass = rep.witnessed >= rate - tol;
  return rep;
}

struct LowTempRow {
  double beta{0.0};
  hamiltonian::CertificateReport window;
  hamiltonian::CertificateReport high;
  double pass_fraction{0.0};
};

struct LowTempReport {
  std::vector<LowTempRow> rows;
  bool nondecreasing{true};
};

// Window and high-|eigenvalue| compressions of the glued surrogate along an
// inverse-temperature ladder, deflating the numerical kernel; the pass
// fraction should not degrade as the temperature drops.
inline LowTempReport low_temperature_certificate(
    const SmallSystem& small, const CouplingProfile& profile,
    const ModeSet& modes, const std::vector<double>& beta_ladder,
    const conjugate::ConjugateSpec& spec, double center_e, double kappa,
    double epsilon, double e0, double rate, int n_total_max,
    int per_mode_cap = -1) {
  LowTempReport rep;
  for (double beta : beta_ladder) {
    const DoubledSystem sys = assemble_liouvillean(small, profile, modes, beta,
                                                   n_total_max, per_mode_cap);
    const GluedSystem gs = glue(sys);
    const Eigensystem& eig = gs.bundle.eig;
    const double scale = std::max(std::abs(eig.values(0)),
                                  std::abs(eig.values(eig.values.size() - 1)));
    std::vector<Eigen::Index> kernel;
    for (Eigen::Index i = 0; i < eig.values.size(); ++i)
      if (std::abs(eig.values(i)) <= 1e-8 * std::max(1.0, scale))
        kernel.push_back(i);
    Matrix excluded(eig.vectors.rows(), static_cast<Eigen::Index>(kernel.size()));
    for (std::size_t k = 0; k < kernel.size(); ++k)
      excluded.col(static_cast<Eigen::Index>(k)) = eig.vectors.col(kernel[k]);

    LowTempRow row;
    row.beta = beta;
    row.window = hamiltonian::mourre_window_certificate(
        gs.bundle, spec, center_e, kappa, epsilon, excluded);
    row.high = absolute_high_energy_certificate(gs.bundle, spec, e0, rate);
    row.pass_fraction =
        0.5 * (double(row.window.pass) + double(row.high.pass));
    rep.rows.push_back(std::move(row));
  }
  for (std::size_t i = 1; i < rep.rows.size(); ++i)
    if (rep.rows[i].pass_fraction < rep.rows[i - 1].pass_fraction)
      rep.nondecreasing = false;
  return rep;
}

}  // namespace pflab::liouville
