// test_hamiltonian.cpp — coupled Hamiltonian assembly, commutator identities,
// certificates, pull-through residuals, and evolution diagnostics
#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <vector>

#include "pflab/conjugate.hpp"
#include "pflab/coupling.hpp"
#include "pflab/hamiltonian.hpp"
#include "pflab/linalg.hpp"

using namespace pflab;
using namespace pflab::hamiltonian;
using Catch::Approx;

namespace {

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

// Single mode at omega = 1 coupled to a one-level system: the exactly
// displaceable instance.  sigma = -g^2/2, ground quanta = (g/sqrt2)^2.
HamiltonianBundle displaced_bundle(double g, int cap) {
  const coupling::SmallSystem small = coupling::make_small({0.0});
  return assemble_hamiltonian(small, make_modes({1.0}), scalar_samples({g}), cap);
}

conjugate::ConjugateSpec translations_spec() {
  conjugate::ConjugateSpec spec;
  spec.variant = conjugate::Variant::translations;
  return spec;
}

double ground_number(const HamiltonianBundle& b) {
  const Vector v = b.eig.vectors.col(0);
  return (v.adjoint() * b.number.to_dense() * v)(0, 0).real();
}

}  // namespace

TEST_CASE("assembly validates inputs") {
  const coupling::SmallSystem small = coupling::make_small({0.0, 0.5});
  const fock::ModeSet modes = make_modes({0.7, 1.3});

  std::vector<Matrix> wrong_count{Matrix::Identity(2, 2)};
  CHECK_THROWS_AS(assemble_hamiltonian(small, modes, wrong_count, 2),
                  std::invalid_argument);

  std::vector<Matrix> wrong_shape{Matrix::Identity(1, 1), Matrix::Identity(1, 1)};
  CHECK_THROWS_AS(assemble_hamiltonian(small, modes, wrong_shape, 2),
                  std::invalid_argument);

  fock::ModeSet signed_modes;
  signed_modes.modes.push_back({-1.0, 1.0, 0});
  signed_modes.modes.push_back({1.0, 1.0, 0});
  std::vector<Matrix> g2{Matrix::Zero(2, 2), Matrix::Zero(2, 2)};
  CHECK_THROWS_AS(assemble_hamiltonian(small, signed_modes, g2, 2),
                  std::invalid_argument);

  // Product dimension above the hard cap: the field basis alone fits.
  const coupling::SmallSystem big = coupling::make_small({0.0, 0.1, 0.2, 0.3});
  fock::ModeSet many;
  for (int j = 0; j < 8; ++j) many.modes.push_back({1.0 + 0.1 * j, 1.0, 0});
  std::vector<Matrix> g8(8, Matrix::Zero(4, 4));
  CHECK_THROWS_AS(assemble_hamiltonian(big, many, g8, 11),
                  fock::dimension_cap_error);
}

TEST_CASE("free assembly has the ladder spectrum and real conjugation symmetry") {
  const coupling::SmallSystem small = coupling::make_small({0.0, 0.7});
  const fock::ModeSet modes = make_modes({0.6, 1.1});
  std::vector<Matrix> zero{Matrix::Zero(2, 2), Matrix::Zero(2, 2)};
  const HamiltonianBundle free = assemble_hamiltonian(small, modes, zero, 3);

  CHECK(free.h.hermitian);
  CHECK(free.h.hermitian_defect() == 0.0);
  CHECK(free.sigma == Approx(0.0).margin(1e-14));

  std::vector<double> expected;
  for (int s = 0; s < small.nu(); ++s)
    for (std::size_t i = 0; i < free.basis.dim(); ++i) {
      double e = small.energies(s);
      for (std::size_t j = 0; j < modes.size(); ++j)
        e += free.basis.states[i][j] * modes.omega(j);
      expected.push_back(e);
    }
  std::sort(expected.begin(), expected.end());
  REQUIRE(free.eig.values.size() == static_cast<Eigen::Index>(expected.size()));
  for (Eigen::Index i = 0; i < free.eig.values.size(); ++i)
    CHECK(free.eig.values(i) ==
          Approx(expected[static_cast<std::size_t>(i)]).margin(1e-11));

  // [H0, N] vanishes identically, and real couplings keep H real.
  CHECK(fock::commutator(free.h0, free.number).max_abs() == 0.0);
  std::vector<Matrix> real_g{0.2 * Matrix::Identity(2, 2),
                             0.1 * Matrix::Identity(2, 2)};
  const HamiltonianBundle coupled = assemble_hamiltonian(small, modes, real_g, 3);
  const Matrix hd = coupled.h.to_dense();
  CHECK((hd - hd.conjugate()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("dense assembly agrees with the explicit tensor construction") {
  const coupling::SmallSystem small = coupling::make_small({0.0, 0.5});
  const fock::ModeSet modes = make_modes({0.7, 1.3});
  std::vector<Matrix> g;
  g.push_back(random_matrix(2, 2, 11));
  g.push_back(random_matrix(2, 2, 12));
  const HamiltonianBundle b = assemble_hamiltonian(small, modes, g, 2);

  Matrix omega = Matrix::Zero(2, 2);
  omega(0, 0) = modes.omega(0);
  omega(1, 1) = modes.omega(1);
  const Matrix id_f = Matrix::Identity(static_cast<Eigen::Index>(b.basis.dim()),
                                       static_cast<Eigen::Index>(b.basis.dim()));
  Matrix expected = kron(small.hamiltonian(), id_f) +
                    kron(Matrix::Identity(2, 2),
                         fock::dgamma(b.basis, omega).to_dense());
  for (std::size_t j = 0; j < 2; ++j) {
    Vector ej = Vector::Zero(2);
    ej(static_cast<Eigen::Index>(j)) = 1.0;
    const Matrix aj = fock::annihilation(b.basis, ej).to_dense();
    expected += (kron(g[j].adjoint(), aj) + kron(g[j], aj.adjoint())) /
                std::sqrt(2.0);
  }
  CHECK((b.h.to_dense() - expected).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("displaced instance pins the ground energy, quanta, and displacement") {
  const HamiltonianBundle b8 = displaced_bundle(0.2, 8);
  CHECK(b8.sigma == Approx(-0.02).margin(1e-8));

  const HamiltonianBundle b12 = displaced_bundle(0.2, 12);
  CHECK(ground_number(b12) == Approx(0.02).margin(1e-8));

  const HamiltonianBundle b6 = displaced_bundle(0.2, 6);
  const HamiltonianBundle b10 = displaced_bundle(0.2, 10);
  CHECK(std::abs(ground_number(b6) - ground_number(b10)) < 1e-6);

  // Ground-state annihilator expectation equals the displacement -g/sqrt2.
  Vector e0 = Vector::Zero(1);
  e0(0) = 1.0;
  const Matrix a_op =
      detail::product_op(Matrix::Identity(1, 1),
                         fock::annihilation(b12.basis, e0), b12.product_id)
          .to_dense();
  const Vector v = b12.eig.vectors.col(0);
  const cplx displacement = (v.adjoint() * a_op * v)(0, 0);
  CHECK(displacement.real() == Approx(-0.1414213562373095).margin(1e-8));
  CHECK(std::abs(displacement.imag()) < 1e-10);

  // The displaced ladder keeps unit spacing: eigenvalues sigma + n.
  for (int n = 0; n < 4; ++n)
    CHECK(b12.eig.values(n) == Approx(b12.sigma + n).margin(1e-7));
}

TEST_CASE("commutator formula matches the literal commutator below cutoff") {
  const coupling::SmallSystem small = coupling::make_small({0.0, 0.5});
  const fock::ModeSet modes = make_modes({0.7, 1.3});
  std::vector<Matrix> g;
  g.push_back(random_matrix(2, 2, 21));
  g.push_back(random_matrix(2, 2, 22));
  const HamiltonianBundle b = assemble_hamiltonian(small, modes, g, 2);

  const CommutatorReport rep = commutator_observable(b, translations_spec());
  CHECK(rep.discrepancy_below_cutoff < 1e-12);
  CHECK(rep.field_sign == -1);
  CHECK(rep.hn_sign == -1);
  CHECK(rep.hn_gap < 1e-12);
  // Both sides truncate the raising part identically, so the identity even
  // holds on the top sector; only mixed reorderings feel the cutoff.
  CHECK(rep.discrepancy_full < 1e-12);

  // Free instance: the identity holds on the whole truncated space.
  std::vector<Matrix> zero{Matrix::Zero(2, 2), Matrix::Zero(2, 2)};
  const HamiltonianBundle free = assemble_hamiltonian(small, modes, zero, 2);
  const CommutatorReport frep = commutator_observable(free, translations_spec());
  CHECK(frep.discrepancy_full < 1e-13);
}

TEST_CASE("virial values vanish on every eigenvector") {
  const coupling::SmallSystem small = coupling::make_small({0.0});
  const fock::ModeSet modes = make_modes({0.5, 1.0, 1.6});
  const HamiltonianBundle b =
      assemble_hamiltonian(small, modes, scalar_samples({0.12, 0.2, 0.15}), 4);

  for (auto variant :
       {conjugate::Variant::translations, conjugate::Variant::m_delta}) {
    conjugate::ConjugateSpec spec;
    spec.variant = variant;
    spec.delta0 = 0.5;
    spec.delta_inf = 2.0;
    const CommutatorReport rep = commutator_observable(b, spec);
    const VirialReport vir = virial_check(b, rep.hprime_exact);
    CHECK(vir.max_abs <= 1e-10 * std::max(1.0, vir.hprime_norm));
  }

  // Degenerate levels force eigenspace rotation before the per-vector read.
  const coupling::SmallSystem twin = coupling::make_small({0.0, 0.0});
  std::vector<Matrix> zero{Matrix::Zero(2, 2), Matrix::Zero(2, 2),
                           Matrix::Zero(2, 2)};
  const HamiltonianBundle bd = assemble_hamiltonian(twin, modes, zero, 3);
  const CommutatorReport drep = commutator_observable(bd, translations_spec());
  const VirialReport dvir = virial_check(bd, drep.hprime_exact);
  CHECK(dvir.degenerate_blocks > 0);
  CHECK(dvir.max_abs <= 1e-10 * std::max(1.0, dvir.hprime_norm));
}

TEST_CASE("spectral table aligns energies, quanta, and virial values") {
  const HamiltonianBundle b = displaced_bundle(0.2, 6);
  const CommutatorReport rep = commutator_observable(b, translations_spec());
  const auto table = spectral_table(b, rep.hprime_exact);
  REQUIRE(table.size() == b.dim());
  CHECK(table[0].eigenvalue == Approx(b.sigma));
  CHECK(table[0].n_expect == Approx(ground_number(b)).margin(1e-12));
  for (const auto& row : table)
    CHECK(std::abs(row.virial) <= 1e-10);
}

TEST_CASE("weak-coupling certificate witnesses the half-number bound") {
  const coupling::SmallSystem small = coupling::make_small({0.0, 0.4});
  const fock::ModeSet modes = make_modes({0.6, 1.0, 1.5});
  Matrix dir = Matrix::Zero(2, 2);
  dir(0, 1) = dir(1, 0) = 1.0;
  std::vector<Matrix> g{0.3 * dir, 0.5 * dir, 0.2 * dir};

  const HamiltonianBundle b = assemble_hamiltonian(small, modes, g, 3);
  const CertificateReport rep = weak_coupling_certificate(b, translations_spec());
  CHECK(rep.pass);
  CHECK(rep.witnessed >= -1e-10);
  REQUIRE(rep.constant > 0.0);

  // Tune the amplitude to the threshold coupling 1/(2 ||aG||).
  const double lambda = 1.0 / (2.0 * rep.constant);
  std::vector<Matrix> gs(g.size());
  for (std::size_t j = 0; j < g.size(); ++j) gs[j] = lambda * g[j];
  const HamiltonianBundle bt = assemble_hamiltonian(small, modes, gs, 3);
  const CertificateReport tuned = weak_coupling_certificate(bt, translations_spec());
  CHECK(tuned.constant == Approx(0.5).margin(1e-12));
  CHECK(tuned.pass);
  CHECK(tuned.witnessed >= -1e-10);
  CHECK(tuned.count <= small.nu());
  CHECK(std::isfinite(tuned.reported));

  // Zero coupling: the witness form is N/2, minimized exactly at the vacuum.
  std::vector<Matrix> zero(3, Matrix::Zero(2, 2));
  const HamiltonianBundle bz = assemble_hamiltonian(small, modes, zero, 3);
  const CertificateReport zrep = weak_coupling_certificate(bz, translations_spec());
  CHECK(std::abs(zrep.witnessed) < 1e-12);
  CHECK(zrep.pass);

  conjugate::ConjugateSpec md;
  md.variant = conjugate::Variant::m_delta;
  md.delta0 = 0.5;
  md.delta_inf = 2.0;
  CHECK_THROWS_AS(weak_coupling_certificate(b, md), std::invalid_argument);
}

TEST_CASE("mourre window certificate compresses the symbol surrogate") {
  conjugate::ConjugateSpec md;
  md.variant = conjugate::Variant::m_delta;
  md.delta0 = 0.5;
  md.delta_inf = 2.0;

  // Free instance: the surrogate is diagonal, so the window witness equals
  // the smallest symbol sum over the window states.
  const coupling::SmallSystem small = coupling::make_small({0.0});
  const fock::ModeSet modes = make_modes({0.8, 1.0, 1.3});
  std::vector<Matrix> zero(3, Matrix::Zero(1, 1));
  const HamiltonianBundle free = assemble_hamiltonian(small, modes, zero, 3);
  const CertificateReport rep =
      mourre_window_certificate(free, md, 1.0, 0.45);
  REQUIRE(rep.dimension == 3);
  double expected = std::numeric_limits<double>::infinity();
  for (double omega : {0.8, 1.0, 1.3})
    expected = std::min(expected, conjugate::symbol_value(omega, md));
  CHECK(rep.witnessed == Approx(expected).margin(1e-12));
  CHECK(rep.pass);  // the symbol plateau keeps the witness at or above one

  // Coupled displaced instance: compress onto the one-quantum cluster.
  const HamiltonianBundle b = displaced_bundle(0.2, 8);
  const CertificateReport win = mourre_window_certificate(
      b, translations_spec(), b.sigma + 1.0, 0.5);
  REQUIRE_FALSE(win.vacuous);
  CHECK(win.dimension == 1);
  CHECK(win.witnessed == Approx(1.02).margin(1e-4));
  CHECK(win.pass);

  // Window holding only the ground state: excluding it leaves a vacuous pass.
  const Matrix ground = b.eig.vectors.leftCols(1);
  const CertificateReport excl = mourre_window_certificate(
      b, translations_spec(), b.sigma, 0.5, 0.5, ground);
  CHECK(excl.vacuous);
  CHECK(excl.pass);
  CHECK(excl.dimension == 0);

  const CertificateReport empty = mourre_window_certificate(
      b, translations_spec(), b.sigma - 5.0, 0.1);
  CHECK(empty.vacuous);
  CHECK(empty.pass);

  const CertificateReport high = mourre_high_energy_certificate(
      b, translations_spec(), b.sigma + 0.5, 0.9);
  REQUIRE_FALSE(high.vacuous);
  CHECK(high.witnessed >= 0.9 - 1e-10);
  CHECK(high.pass);
  const CertificateReport above = mourre_high_energy_certificate(
      b, translations_spec(), b.eig.values(b.eig.values.size() - 1) + 1.0, 0.9);
  CHECK(above.vacuous);
}

TEST_CASE("pull-through residual vanishes below cutoff") {
  const coupling::SmallSystem small = coupling::make_small({0.0, 0.4});
  const fock::ModeSet modes = make_modes({0.7, 1.3});
  std::vector<Matrix> g;
  g.push_back(0.01 * random_matrix(2, 2, 31));
  g.push_back(0.01 * random_matrix(2, 2, 32));
  const HamiltonianBundle b = assemble_hamiltonian(small, modes, g, 5);

  Vector psi = Vector::Zero(static_cast<Eigen::Index>(b.dim()));
  psi(0) = 1.0;  // vacuum ⊗ first level: far below the cutoff
  for (cplx z : {cplx(b.sigma - 1.0, 0.0), cplx(b.sigma - 0.5, 0.8)}) {
    const PullthroughReport rep = pullthrough_residual(b, z, psi);
    CHECK_FALSE(rep.top_sector_touched);
    CHECK(rep.max_residual < 1e-10);
  }

  // Free instance: the annihilator intertwines the shifted resolvents.
  std::vector<Matrix> zero{Matrix::Zero(2, 2), Matrix::Zero(2, 2)};
  const HamiltonianBundle free = assemble_hamiltonian(small, modes, zero, 5);
  const PullthroughReport frep =
      pullthrough_residual(free, cplx(free.sigma - 1.0, 0.0), psi);
  CHECK(frep.max_residual < 1e-13);

  // A state on the top sector leaks: reported, never asserted small.
  Vector top = Vector::Zero(static_cast<Eigen::Index>(b.dim()));
  for (std::size_t i = 0; i < b.basis.dim(); ++i)
    if (b.basis.total(i) == 5) {
      top(static_cast<Eigen::Index>(i)) = 1.0;
      break;
    }
  const PullthroughReport trep =
      pullthrough_residual(b, cplx(b.sigma - 1.0, 0.0), top);
  CHECK(trep.top_sector_touched);
  CHECK(trep.max_residual > 1e-8);

  CHECK_THROWS_AS(pullthrough_residual(b, cplx(b.eig.values(0), 0.0), psi),
                  std::invalid_argument);
  CHECK_THROWS_AS(pullthrough_residual(b, cplx(b.sigma - 1.0, 0.0),
                                       Vector::Zero(3)),
                  std::invalid_argument);
}

TEST_CASE("evolution traces average to the cluster weights") {
  const coupling::SmallSystem small = coupling::make_small({0.0});
  const fock::ModeSet modes = make_modes({1.0, 2.0});
  std::vector<Matrix> zero{Matrix::Zero(1, 1), Matrix::Zero(1, 1)};
  const HamiltonianBundle free = assemble_hamiltonian(small, modes, zero, 3);

  // Equal weight on three distinct integer levels; all Bohr frequencies are
  // integers, so averaging over one 2π period on a uniform grid is exact.
  Vector psi = Vector::Zero(static_cast<Eigen::Index>(free.dim()));
  const std::size_t i0 = 0;
  std::size_t i1 = 0, i2 = 0;
  for (std::size_t i = 0; i < free.basis.dim(); ++i) {
    if (free.basis.states[i][0] == 1 && free.basis.states[i][1] == 0) i1 = i;
    if (free.basis.states[i][0] == 0 && free.basis.states[i][1] == 1) i2 = i;
  }
  const double root3 = 1.0 / std::sqrt(3.0);
  psi(static_cast<Eigen::Index>(i0)) = root3;
  psi(static_cast<Eigen::Index>(i1)) = root3;
  psi(static_cast<Eigen::Index>(i2)) = root3;

  std::vector<double> times;
  const int grid = 64;
  for (int m = 0; m < grid; ++m)
    times.push_back(2.0 * M_PI * m / static_cast<double>(grid));
  const EvolutionReport rep = evolve_and_approach(free, psi, psi, times);
  CHECK(rep.mean_square_limit == Approx(1.0 / 3.0).margin(1e-12));
  CHECK(rep.mean_square_finite == Approx(rep.mean_square_limit).margin(1e-10));
  CHECK(rep.ground_matrix_element.real() == Approx(1.0 / 3.0).margin(1e-12));
  CHECK(std::abs(rep.ground_matrix_element.imag()) < 1e-12);

  // Time reversal conjugates the trace.
  std::vector<double> back;
  for (double t : times) back.push_back(-t);
  const EvolutionReport brep = evolve_and_approach(free, psi, psi, back);
  for (std::size_t k = 0; k < times.size(); ++k)
    CHECK(std::abs(brep.trace[k] - std::conj(rep.trace[k])) < 1e-12);

  // Evolving the ground state itself yields a constant trace.
  Vector ground = Vector::Zero(static_cast<Eigen::Index>(free.dim()));
  ground(0) = 1.0;
  const EvolutionReport grep = evolve_and_approach(free, psi, ground, times);
  for (const cplx& c : grep.trace)
    CHECK(std::abs(c - grep.trace[0]) < 1e-12);

  // Coupled displaced instance: unit Bohr spacing again, so the grid average
  // converges to the ground matrix element exactly over one period.
  const HamiltonianBundle b = displaced_bundle(0.2, 10);
  Vector phi = Vector::Zero(static_cast<Eigen::Index>(b.dim()));
  phi(0) = 1.0;
  const EvolutionReport crep = evolve_and_approach(b, phi, phi, times);
  CHECK(std::abs(crep.cesaro_finite - crep.ground_matrix_element) < 1e-7);
}

TEST_CASE("ground energy scan is concave and nonincreasing for the displaced law") {
  const coupling::SmallSystem small = coupling::make_small({0.0});
  const fock::ModeSet modes = make_modes({1.0});
  const coupling::CouplingProfile profile = scalar_samples({0.2});
  const GroundScan scan = ground_energy_scan(
      small, modes, profile, {0.0, 0.25, 0.5, 0.75, 1.0}, 10);
  REQUIRE(scan.sigmas.size() == 5);
  CHECK(scan.nonincreasing);
  CHECK(scan.concavity_defect < 1e-9);
  for (std::size_t i = 0; i < scan.lambdas.size(); ++i) {
    const double l = scan.lambdas[i];
    CHECK(scan.sigmas[i] == Approx(-0.02 * l * l).margin(1e-7));
  }
}

TEST_CASE("number moment scan saturates and reports the weighted-norm bound") {
  const coupling::SmallSystem small = coupling::make_small({0.0});
  coupling::RadialGrid grid;
  grid.omega_max = 2.0;
  grid.points_per_panel = 2;
  grid.ir_levels = 2;
  const coupling::CouplingProfile profile =
      coupling::CouplingProfile::scalar_law(0.05, 0.5, 1.0, 0.1);
  const MomentScan scan = number_moment_scan(small, grid, profile, {3, 4}, 2);
  REQUIRE(scan.rows.size() == 4);
  CHECK(scan.bound_value > 0.0);
  CHECK(std::isfinite(scan.bound_value));
  double n3 = 0.0, n4 = 0.0;
  for (const auto& row : scan.rows) {
    if (row.cap == 3 && row.index == 0) n3 = row.n_expect;
    if (row.cap == 4 && row.index == 0) n4 = row.n_expect;
  }
  CHECK(std::abs(n4 - n3) < 1e-4);
  CHECK(n4 >= 0.0);
}

TEST_CASE("resolvent continuity is witnessed with a stable fitted constant") {
  const coupling::SmallSystem small = coupling::make_small({0.0, 0.4});
  const fock::ModeSet modes = make_modes({0.7, 1.3});
  std::vector<Matrix> g1{0.1 * Matrix::Identity(2, 2),
                         0.2 * Matrix::Identity(2, 2)};
  std::vector<Matrix> g2 = g1;
  g2[0] += 0.01 * Matrix::Identity(2, 2);
  std::vector<Matrix> g3 = g1;
  g3[0] += 0.005 * Matrix::Identity(2, 2);

  const HamiltonianBundle b = assemble_hamiltonian(small, modes, g1, 4);
  const std::vector<cplx> zs{cplx(b.sigma - 1.0, 0.0), cplx(b.sigma - 0.5, 0.7)};
  const auto probes = resolvent_continuity(small, modes, g1, g2, zs, 4);
  const auto halved = resolvent_continuity(small, modes, g1, g3, zs, 4);
  REQUIRE(probes.size() == 2);
  for (std::size_t k = 0; k < probes.size(); ++k) {
    CHECK(probes[k].fitted_c > 0.0);
    CHECK(std::isfinite(probes[k].fitted_c));
    const double ratio = halved[k].fitted_c / probes[k].fitted_c;
    CHECK(ratio > 0.5);
    CHECK(ratio < 2.0);
  }
  CHECK_THROWS_AS(resolvent_continuity(small, modes, g1, g2,
                                       {cplx(b.sigma, 0.0)}, 4),
                  std::invalid_argument);
}
