// test_liouville.cpp — doubled-space assembly, modular symmetry, gluing,
// thermal vectors, dressing oracles, Weyl expectations, time averages, and
// low-temperature certificates
#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <limits>
#include <vector>

#include "pflab/conjugate.hpp"
#include "pflab/coupling.hpp"
#include "pflab/hamiltonian.hpp"
#include "pflab/linalg.hpp"
#include "pflab/liouville.hpp"

using namespace pflab;
using namespace pflab::liouville;
using Catch::Approx;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

fock::ModeSet make_modes(std::initializer_list<double> omegas) {
  fock::ModeSet m;
  double w = 0.3;
  for (double omega : omegas) {
    m.modes.push_back({omega, w, 0});
    w += 0.2;
  }
  return m;
}

coupling::CouplingProfile scalar_samples(std::initializer_list<double> values) {
  std::vector<Matrix> samples;
  for (double v : values) samples.push_back(v * Matrix::Identity(1, 1));
  return coupling::CouplingProfile::from_samples(samples, 0.1);
}

coupling::CouplingProfile zero_profile(int nu, std::size_t count) {
  return coupling::CouplingProfile::from_samples(
      std::vector<Matrix>(count, Matrix::Zero(nu, nu)), 0.1);
}

coupling::CouplingProfile random_profile(int nu, std::size_t count,
                                         double amplitude,
                                         std::uint64_t seed) {
  std::vector<Matrix> samples;
  for (std::size_t j = 0; j < count; ++j)
    samples.push_back(amplitude *
                      random_matrix(static_cast<std::size_t>(nu),
                                          static_cast<std::size_t>(nu),
                                          seed + j));
  return coupling::CouplingProfile::from_samples(samples, 0.1);
}

conjugate::ConjugateSpec translations_spec() {
  conjugate::ConjugateSpec spec;
  spec.variant = conjugate::Variant::translations;
  return spec;
}

// Two levels, two modes, mildly coupled: the workhorse doubled instance.
DoubledSystem coupled_system(double beta, int cap, double amplitude = 0.1) {
  const coupling::SmallSystem small = coupling::make_small({0.0, 1.0});
  return assemble_liouvillean(small, random_profile(2, 2, amplitude, 41),
                              make_modes({1.0, 2.0}), beta, cap);
}

Vector vacuum_product_state(const DoubledSystem& sys) {
  Vector v = Vector::Zero(static_cast<Eigen::Index>(sys.dim()));
  std::vector<int> zeros(sys.basis.mode_count(), 0);
  v(static_cast<Eigen::Index>(sys.basis.index_of(zeros))) = 1.0;
  return v;
}

}  // namespace

TEST_CASE("level thermal state and pair generator pin the closed forms") {
  const coupling::SmallSystem small = coupling::make_small({0.0, 1.0});

  const Matrix rho = gibbs_small(small, std::log(2.0));
  CHECK(rho(0, 0).real() == Approx(2.0 / 3.0).margin(1e-14));
  CHECK(rho(1, 1).real() == Approx(1.0 / 3.0).margin(1e-14));
  CHECK(std::abs(rho(0, 1)) == 0.0);

  const Matrix cold = gibbs_small(small, kInf);
  CHECK(cold(0, 0).real() == 1.0);
  CHECK(cold(1, 1).real() == 0.0);

  CHECK_THROWS_AS(gibbs_small(small, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(gibbs_small(small, -1.0), std::invalid_argument);

  const fock::SparseOp lp = lp_operator(small);
  CHECK(lp.hermitian);
  const Eigensystem es = eig_hermitian(lp.to_dense());
  const std::vector<double> expected{-1.0, 0.0, 0.0, 1.0};
  for (int k = 0; k < 4; ++k)
    CHECK(es.values(k) == Approx(expected[static_cast<std::size_t>(k)]).margin(1e-14));

  const Vector pair = gibbs_pair_vector(small, std::log(2.0));
  CHECK(pair.norm() == Approx(1.0).margin(1e-14));
  CHECK(pair(0).real() == Approx(std::sqrt(2.0 / 3.0)).margin(1e-14));
  CHECK(pair(3).real() == Approx(std::sqrt(1.0 / 3.0)).margin(1e-14));
  CHECK(std::abs(pair(1)) == 0.0);
  CHECK(std::abs(pair(2)) == 0.0);
}

TEST_CASE("doubled assembly validates inputs and enforces the cap") {
  const coupling::SmallSystem small = coupling::make_small({0.0, 1.0});
  const fock::ModeSet modes = make_modes({1.0, 2.0});

  CHECK_THROWS_AS(assemble_liouvillean(small, zero_profile(2, 2), modes, 0.0, 2),
                  std::invalid_argument);
  CHECK_THROWS_AS(assemble_liouvillean(small, zero_profile(2, 2), modes, -2.0, 2),
                  std::invalid_argument);
  // Coupling sampled at the wrong level count.
  CHECK_THROWS_AS(assemble_liouvillean(small, scalar_samples({0.1, 0.1}), modes,
                                       1.0, 2),
                  std::invalid_argument);
  // A reservoir tag with no inverse temperature.
  fock::ModeSet tagged = modes;
  tagged.modes[1].reservoir = 1;
  CHECK_THROWS_AS(assemble_liouvillean(small, zero_profile(2, 2), tagged,
                                       std::vector<double>{1.0}, 2),
                  std::invalid_argument);

  const coupling::SmallSystem wide = coupling::make_small({0.0, 1.0, 2.0, 3.0});
  const fock::ModeSet six = make_modes({1.0, 1.1, 1.2, 1.3, 1.4, 1.5});
  CHECK_THROWS_AS(assemble_liouvillean(wide, zero_profile(4, 6), six, 1.0, 6),
                  fock::dimension_cap_error);
}

TEST_CASE("free doubled generator has the difference spectrum and exact modular symmetry") {
  const coupling::SmallSystem small = coupling::make_small({0.0, 1.0});
  const fock::ModeSet modes = make_modes({1.0, 1.3});
  const DoubledSystem sys =
      assemble_liouvillean(small, zero_profile(2, 2), modes, 2.0, 3);

  CHECK(sys.modular_defect == 0.0);
  CHECK(sys.mirror_defect < 1e-12);
  CHECK(sys.lbeta.hermitian);

  // Enumerate the difference spectrum directly.
  std::vector<double> expected;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      for (std::size_t i = 0; i < sys.basis.dim(); ++i) {
        const std::vector<int>& st = sys.basis.states[i];
        expected.push_back(small.energies(a) - small.energies(b) +
                           1.0 * st[0] + 1.3 * st[1] - 1.0 * st[2] -
                           1.3 * st[3]);
      }
  std::sort(expected.begin(), expected.end());
  REQUIRE(expected.size() == sys.dim());
  for (std::size_t k = 0; k < expected.size(); ++k)
    CHECK(sys.eig.values(static_cast<Eigen::Index>(k)) ==
          Approx(expected[k]).margin(1e-11));

  // The copy swap squares to the identity.
  const fock::SparseOp square = sys.exchange * sys.exchange;
  CHECK((square - fock::identity_op(sys.dim(), sys.product_id)).max_abs() == 0.0);

  // Without coupling the kernel holds at least one state per level pair.
  int kernel = 0;
  for (Eigen::Index k = 0; k < sys.eig.values.size(); ++k)
    if (std::abs(sys.eig.values(k)) < 1e-10) ++kernel;
  CHECK(kernel >= small.nu());

  // The free generator commutes with the joint occupancy exactly.
  CHECK(fock::commutator(sys.l0, sys.n_field).max_abs() == 0.0);
}

TEST_CASE("coupled doubled generator keeps modular symmetry and the spectral mirror") {
  const DoubledSystem sys = coupled_system(1.5, 3);
  CHECK(sys.modular_defect == 0.0);
  CHECK(sys.mirror_defect < 1e-10);
  CHECK(sys.lbeta.hermitian);
  CHECK(sys.dim() == 4 * sys.basis.dim());

  // Distinct reservoirs take distinct temperatures.
  fock::ModeSet tagged = make_modes({1.0, 2.0});
  tagged.modes[1].reservoir = 1;
  const DoubledSystem two = assemble_liouvillean(
      coupling::make_small({0.0, 1.0}), random_profile(2, 2, 0.1, 41), tagged,
      std::vector<double>{1.0, 4.0}, 3);
  CHECK(two.modular_defect == 0.0);
  CHECK(two.pairs[0].rho != two.pairs[1].rho);

  // At infinite inverse temperature the interaction reduces to the two
  // one-sided couplings exactly.
  const coupling::SmallSystem small = coupling::make_small({0.0, 1.0});
  const coupling::CouplingProfile profile = random_profile(2, 2, 0.1, 41);
  const DoubledSystem cold = assemble_liouvillean(
      small, profile, make_modes({1.0, 2.0}), kInf, 3);
  const std::vector<Matrix> gs =
      coupling::sample_coupling(profile, make_modes({1.0, 2.0}));
  const Matrix id = Matrix::Identity(2, 2);
  std::vector<Matrix> manual;
  manual.push_back(kron(gs[0], id));
  manual.push_back(kron(gs[1], id));
  manual.push_back(-kron(id, gs[0].conjugate()));
  manual.push_back(-kron(id, gs[1].conjugate()));
  const fock::SparseOp expected =
      hamiltonian::field_term(cold.basis, manual, cold.product_id);
  CHECK((cold.wbeta - expected).max_abs() == 0.0);
}

TEST_CASE("interaction bound holds on random probes") {
  const DoubledSystem sys = coupled_system(2.0, 3);
  const WbetaReport rep = wbeta_bound_check(sys, 200, 907);
  CHECK(rep.rows.size() == 201);
  CHECK(rep.all_hold);
  CHECK(rep.max_ratio <= 1.0);
  CHECK(rep.kappa > 0.0);

  // Scalar hand check of the constant.
  const DoubledSystem scalar = assemble_liouvillean(
      coupling::make_small({0.0}), scalar_samples({0.3}), make_modes({1.0}),
      4.0, 3);
  const WbetaReport srep = wbeta_bound_check(scalar, 10, 11);
  CHECK(srep.kappa == Approx(0.3 + 2.0 / std::sqrt(4.0) * 0.3).margin(1e-14));

  // No interaction, no left side.
  const DoubledSystem free_sys = assemble_liouvillean(
      coupling::make_small({0.0, 1.0}), zero_profile(2, 2),
      make_modes({1.0, 2.0}), 2.0, 3);
  const WbetaReport frep = wbeta_bound_check(free_sys, 20, 5);
  CHECK(frep.max_ratio == 0.0);
  CHECK(frep.all_hold);
}

TEST_CASE("gluing transports the doubled generator onto the signed field") {
  const DoubledSystem sys = coupled_system(1.2, 3);
  const GluedSystem gs = glue(sys);

  REQUIRE(gs.gluing.modes.size() == 4);
  CHECK(gs.gluing.modes.omega(0) == -2.0);
  CHECK(gs.gluing.modes.omega(1) == -1.0);
  CHECK(gs.gluing.modes.omega(2) == 1.0);
  CHECK(gs.gluing.modes.omega(3) == 2.0);

  CHECK(gs.transport_gap < 1e-12);
  CHECK(gs.number_gap == 0.0);
  CHECK(gs.bundle.h.hermitian);
  CHECK(gs.bundle.dim() == sys.dim());

  // The relabeling is unitary on the nose.
  const fock::SparseOp uu = gs.u * fock::adjoint(gs.u);
  CHECK((uu - fock::identity_op(sys.dim(), gs.bundle.product_id)).max_abs() ==
        0.0);

  // Node forms are the thermal pair entries verbatim.
  for (std::size_t j = 0; j < sys.modes.size(); ++j) {
    const int pos = gs.gluing.positive_index[j];
    const int neg = gs.gluing.negative_index[j];
    CHECK((gs.gluing.form[static_cast<std::size_t>(pos)] - sys.pairs[j].left)
              .cwiseAbs()
              .maxCoeff() == 0.0);
    CHECK((gs.gluing.form[static_cast<std::size_t>(neg)] + sys.pairs[j].right)
              .cwiseAbs()
              .maxCoeff() == 0.0);
  }

  // The glued spectrum keeps the mirror symmetry.
  double mirror = 0.0;
  const Eigen::Index n = gs.bundle.eig.values.size();
  for (Eigen::Index k = 0; k < n; ++k)
    mirror = std::max(mirror, std::abs(gs.bundle.eig.values(k) +
                                       gs.bundle.eig.values(n - 1 - k)));
  CHECK(mirror < 1e-10);
}

TEST_CASE("glued commutator identity and virial vanish") {
  const DoubledSystem sys = coupled_system(1.2, 3);
  const GluedSystem gs = glue(sys);

  const hamiltonian::CommutatorReport rep =
      liouvillean_commutator(gs, translations_spec());
  CHECK(rep.discrepancy_below_cutoff < 1e-11);
  CHECK(rep.discrepancy_full < 1e-11);
  CHECK(rep.field_sign == -1);
  CHECK(rep.hn_sign == -1);
  CHECK(rep.hn_gap < 1e-11);

  const hamiltonian::VirialReport vir =
      hamiltonian::virial_check(gs.bundle, rep.hprime_exact);
  CHECK(vir.max_abs <= 1e-10 * std::max(1.0, vir.hprime_norm));

  conjugate::ConjugateSpec md;
  md.variant = conjugate::Variant::m_delta;
  const hamiltonian::CommutatorReport mrep = liouvillean_commutator(gs, md);
  CHECK(mrep.discrepancy_below_cutoff < 1e-11);
}

TEST_CASE("weak-coupling certificate on the glued generator") {
  const DoubledSystem sys = coupled_system(1.5, 3, 0.02);
  const GluedSystem gs = glue(sys);
  const hamiltonian::CertificateReport rep =
      weak_coupling_liouville_certificate(gs, translations_spec());
  CHECK(rep.pass);
  CHECK(rep.witnessed >= -1e-10);
  CHECK(rep.count <= 4);

  // Without coupling the rotated field vanishes and the bound saturates at
  // the vacuum sector: one flat direction per level pair.
  const DoubledSystem free_sys = assemble_liouvillean(
      coupling::make_small({0.0, 1.0}), zero_profile(2, 2),
      make_modes({1.0, 2.0}), 1.5, 3);
  const GluedSystem free_glued = glue(free_sys);
  const hamiltonian::CertificateReport frep =
      weak_coupling_liouville_certificate(free_glued, translations_spec());
  CHECK(std::abs(frep.witnessed) < 1e-12);
  CHECK(frep.count <= 4);
  CHECK(frep.count >= 1);
}

TEST_CASE("pull-through residuals vanish for weak glued coupling") {
  const coupling::SmallSystem small = coupling::make_small({0.0});
  const DoubledSystem sys = assemble_liouvillean(
      small, scalar_samples({0.01}), make_modes({1.0}), 1.0, 5);
  const GluedSystem gs = glue(sys);
  const Vector psi = vacuum_product_state(sys);

  for (const cplx z : {cplx(-0.7, 0.0), cplx(-0.5, 0.8)}) {
    const hamiltonian::PullthroughReport rep =
        pullthrough_residual_glued(gs, z, psi);
    CHECK(rep.max_residual < 1e-10);
    CHECK_FALSE(rep.top_sector_touched);
  }

  const DoubledSystem free_sys = assemble_liouvillean(
      small, scalar_samples({0.0}), make_modes({1.0}), 1.0, 5);
  const GluedSystem free_glued = glue(free_sys);
  const hamiltonian::PullthroughReport frep = pullthrough_residual_glued(
      free_glued, cplx(-0.7, 0.0), vacuum_product_state(free_sys));
  CHECK(frep.max_residual < 1e-13);

  CHECK_THROWS_AS(
      pullthrough_residual_glued(gs, cplx(gs.bundle.eig.values(0), 0.0), psi),
      std::invalid_argument);
}

TEST_CASE("single-quantum probes localize candidate branch points") {
  const coupling::SmallSystem small = coupling::make_small({0.0});

  // Free case: the probe residual is the distance to the nearest node.
  const DoubledSystem free_sys = assemble_liouvillean(
      small, scalar_samples({0.0, 0.0}), make_modes({1.0, 2.0}), 1.0, 2);
  const GluedSystem free_glued = glue(free_sys);
  CHECK(hvz_probe(free_glued, 2.0).best_residual == 0.0);
  CHECK(hvz_probe(free_glued, 1.4).best_residual == Approx(0.4).margin(1e-12));

  // Refining the grid near the probe point shrinks the residual.
  const DoubledSystem coarse = assemble_liouvillean(
      small, scalar_samples({0.05, 0.05}), make_modes({1.0, 2.0}), 1.0, 2);
  const DoubledSystem fine = assemble_liouvillean(
      small, scalar_samples({0.05, 0.05, 0.05}), make_modes({1.0, 1.5, 2.0}),
      1.0, 2);
  const double coarse_res = hvz_probe(glue(coarse), 1.4).best_residual;
  const double fine_res = hvz_probe(glue(fine), 1.4).best_residual;
  CHECK(fine_res < coarse_res);
}

TEST_CASE("thermal vector minimizes the generator residual at the half exponent") {
  const coupling::SmallSystem small = coupling::make_small({0.0});

  // No interaction: the product state is invariant exactly.
  const DoubledSystem free_sys = assemble_liouvillean(
      small, scalar_samples({0.0}), make_modes({1.0}), 1.0, 4);
  const KmsReport frep = kms_vector(free_sys);
  CHECK(frep.residual == 0.0);
  CHECK(frep.overlap == 1.0);
  CHECK((frep.state - frep.reference).norm() == 0.0);

  // Weakly coupled single level: the residual decreases strictly along the
  // cutoff ladder and the candidate stays close to the product state.
  std::vector<double> residuals;
  double final_overlap = 0.0;
  for (int cap : {3, 5, 8}) {
    const DoubledSystem sys = assemble_liouvillean(
        small, scalar_samples({0.05}), make_modes({1.0}), 1.0, cap);
    const KmsReport rep = kms_vector(sys);
    CHECK(rep.residual == std::min(rep.residual_full, rep.residual_half));
    CHECK(rep.exponent == (rep.half_exponent ? 0.5 : 1.0));
    residuals.push_back(rep.residual);
    final_overlap = rep.overlap;
  }
  CHECK(residuals[1] < residuals[0]);
  CHECK(residuals[2] < residuals[1]);
  CHECK(final_overlap > 0.999);

  CHECK_THROWS_AS(
      kms_vector(assemble_liouvillean(small, scalar_samples({0.1}),
                                      make_modes({1.0}), kInf, 3)),
      std::invalid_argument);
}

TEST_CASE("single-level oracle pins the closed shift and the dressing decay") {
  const coupling::SmallSystem small = coupling::make_small({0.0});

  const DoubledSystem sys = assemble_liouvillean(
      small, scalar_samples({0.2}), make_modes({1.0}), 1.0, 8);
  const VanHoveReport rep = vanhove_oracle(sys);
  CHECK(rep.shift_closed == Approx(-0.02).margin(1e-15));
  CHECK(rep.shift_gap < 1e-8);
  CHECK(rep.dressing_gap < 1e-4);

  const DoubledSystem coarse = assemble_liouvillean(
      small, scalar_samples({0.2}), make_modes({1.0}), 1.0, 4);
  const DoubledSystem fine = assemble_liouvillean(
      small, scalar_samples({0.2}), make_modes({1.0}), 1.0, 10);
  const double gap4 = vanhove_oracle(coarse).dressing_gap;
  const double gap10 = vanhove_oracle(fine).dressing_gap;
  CHECK(gap4 > 0.0);
  CHECK(gap10 * 10.0 <= gap4);

  // Cold and uncoupled: the dressing is the identity.
  const DoubledSystem trivial = assemble_liouvillean(
      small, scalar_samples({0.0}), make_modes({1.0}), kInf, 4);
  const VanHoveReport trep = vanhove_oracle(trivial);
  CHECK(trep.shift_closed == 0.0);
  CHECK(trep.dressing_gap_full < 1e-12);

  CHECK_THROWS_AS(vanhove_oracle(coupled_system(1.0, 3)),
                  std::invalid_argument);

  // Infrared refinement grows the ground occupancy when the coupling is too
  // singular for a bounded quanta budget.
  const coupling::CouplingProfile singular =
      coupling::CouplingProfile::scalar_law(0.3, -0.6, 1.0, 0.3);
  std::vector<fock::ModeSet> grids;
  for (int n : {4, 8, 16}) {
    fock::ModeSet grid;
    const double h = 2.0 / n;
    for (int j = 1; j <= n; ++j) grid.modes.push_back({j * h, h, 0});
    grids.push_back(grid);
  }
  const std::vector<double> trend = ir_number_trend(small, singular, grids, 2);
  REQUIRE(trend.size() == 3);
  CHECK(trend[1] > trend[0]);
  CHECK(trend[2] > trend[1]);
}

TEST_CASE("thermal Weyl expectation matches the closed form") {
  const fock::ModeSet modes = make_modes({1.0});
  Vector f(1);
  f(0) = 0.5;

  const WeylReport vac = weyl_expectation(modes, {kInf}, f, 12);
  CHECK(std::abs(vac.value.real() - 0.9394130628134758) < 1e-8);
  CHECK(std::abs(vac.value.imag()) < 1e-10);
  CHECK(vac.gap < 1e-8);

  const WeylReport thermal = weyl_expectation(modes, {1.0}, f, 12);
  CHECK(std::abs(thermal.value.real() - 0.8735000533266176) < 1e-8);
  CHECK(thermal.gap < 1e-8);

  Vector zero(1);
  zero(0) = 0.0;
  const WeylReport unit = weyl_expectation(modes, {1.0}, zero, 6);
  CHECK(unit.value.real() == 1.0);
  CHECK(unit.value.imag() == 0.0);
  CHECK(unit.gap == 0.0);

  Vector small_f(1);
  small_f(0) = 0.2;
  const WeylReport comm = weyl_expectation(modes, {1.0}, small_f, 12);
  CHECK(comm.commutation_margin == 6);
  CHECK(comm.commutation_defect < 1e-8);

  Vector wrong(2);
  wrong.setZero();
  CHECK_THROWS_AS(weyl_expectation(modes, {1.0}, wrong, 6),
                  std::invalid_argument);
  fock::ModeSet tagged = modes;
  tagged.modes[0].reservoir = 2;
  CHECK_THROWS_AS(weyl_expectation(tagged, {1.0}, f, 6),
                  std::invalid_argument);
}

TEST_CASE("time averages collapse onto eigenvalue coincidences") {
  // Integer difference spectrum: a uniform grid over one period averages
  // every oscillating term to zero exactly.
  const coupling::SmallSystem small = coupling::make_small({0.0, 1.0});
  const DoubledSystem sys = assemble_liouvillean(
      small, zero_profile(2, 2), make_modes({1.0, 2.0}), 1.0, 2);

  const Matrix a = sys.n_field.to_dense();
  Vector psi = Vector::Zero(static_cast<Eigen::Index>(sys.dim()));
  for (Eigen::Index i = 0; i < 5; ++i) psi(i) = 1.0;
  psi /= psi.norm();
  std::vector<double> times;
  for (int k = 0; k < 64; ++k)
    times.push_back(2.0 * M_PI * k / 64.0);

  const KoopmanReport rep = koopman_diagnostics(sys, a, psi, times);
  CHECK(std::abs(rep.mean_finite - rep.mean_limit) < 1e-10);
  CHECK(std::abs(rep.mean_limit.imag()) < 1e-10);
  CHECK(rep.kernel_dim >= small.nu());

  // The identity observable freezes the correlation at the state norm.
  const Matrix id = Matrix::Identity(a.rows(), a.cols());
  const KoopmanReport unit = koopman_diagnostics(sys, id, psi, times);
  for (const cplx& s : unit.samples)
    CHECK(std::abs(s - cplx(1.0)) < 1e-12);
  CHECK(std::abs(unit.mean_limit - cplx(1.0)) < 1e-12);

  // A joint cutoff of one leaves a simple kernel: only the vacuum pairs.
  const coupling::SmallSystem one = coupling::make_small({0.0});
  const DoubledSystem tiny = assemble_liouvillean(
      one, scalar_samples({0.0}), make_modes({1.0}), 1.0, 1);
  const Matrix an = tiny.n_field.to_dense();
  Vector near_vac = vacuum_product_state(tiny);
  for (Eigen::Index i = 0; i < near_vac.size(); ++i)
    if (near_vac(i) == cplx(0.0)) near_vac(i) = 0.015;
  near_vac /= near_vac.norm();
  const KoopmanReport simple =
      koopman_diagnostics(tiny, an, near_vac, times);
  CHECK(simple.kernel_dim == 1);
  CHECK(simple.kernel_simple);
  CHECK(simple.kernel_gap == Approx(1.0).margin(1e-12));
  CHECK(simple.equilibrium == Approx(0.0).margin(1e-12));
  CHECK(simple.equilibrium_gap < 1e-3);

  CHECK_THROWS_AS(koopman_diagnostics(sys, Matrix::Identity(3, 3), psi, times),
                  std::invalid_argument);
  CHECK_THROWS_AS(koopman_diagnostics(sys, a, psi, {}),
                  std::invalid_argument);
}

TEST_CASE("low-temperature certificates hold along the ladder") {
  const coupling::SmallSystem small = coupling::make_small({0.0, 1.0});
  const fock::ModeSet modes = make_modes({0.5, 0.9});
  const coupling::CouplingProfile profile = random_profile(2, 2, 0.02, 23);

  const LowTempReport rep = low_temperature_certificate(
      small, profile, modes, {8.0, 16.0, 32.0, 64.0}, translations_spec(),
      0.55, 0.3, 0.5, 1.3, 0.7, 3);
  REQUIRE(rep.rows.size() == 4);
  for (const LowTempRow& row : rep.rows) {
    CHECK(row.window.pass);
    CHECK(row.high.pass);
    CHECK(row.pass_fraction == 1.0);
  }
  CHECK(rep.nondecreasing);

  // Cold uncoupled limit: the window compression is the occupancy itself.
  const DoubledSystem cold = assemble_liouvillean(
      small, zero_profile(2, 2), modes, kInf, 3);
  const GluedSystem gs = glue(cold);
  const hamiltonian::CertificateReport window =
      hamiltonian::mourre_window_certificate(gs.bundle, translations_spec(),
                                             0.55, 0.3, 0.5);
  CHECK_FALSE(window.vacuous);
  CHECK(window.witnessed == Approx(1.0).margin(1e-12));
}

TEST_CASE("doubled spectral table rows are mirror-consistent") {
  const DoubledSystem sys = coupled_system(1.5, 3);
  const std::vector<DoubledRow> rows = doubled_spectral_table(sys);
  REQUIRE(rows.size() == sys.dim());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    CHECK(rows[k].index == static_cast<int>(k));
    CHECK(rows[k].mirror_defect < 1e-10);
    CHECK(rows[k].n_expect >= -1e-12);
  }
}
