// linalg.hpp — dense complex helpers shared across the laboratory
#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <vector>

namespace pflab {

using cplx = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;
using RealMatrix = Eigen::MatrixXd;

struct Eigensystem {
  RealVector values;  // ascending
  Matrix vectors;     // columns, orthonormal
};

inline double hermitian_defect(const Matrix& a) {
  return (a - a.adjoint()).cwiseAbs().maxCoeff();
}

// Dense Hermitian eigendecomposition. Symmetrizes fp noise, rejects a real defect.
inline Eigensystem eig_hermitian(const Matrix& a, double defect_tol = 1e-9) {
  if (a.rows() != a.cols())
    throw std::invalid_argument("eig_hermitian: matrix must be square");
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  if (hermitian_defect(a) > defect_tol * scale)
    throw std::invalid_argument("eig_hermitian: matrix is not Hermitian");
  Eigen::SelfAdjointEigenSolver<Matrix> solver(((a + a.adjoint()) / 2.0).eval());
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("eig_hermitian: eigensolver failed to converge");
  return {solver.eigenvalues(), solver.eigenvectors()};
}

inline double lambda_min(const Matrix& a) {
  if (a.rows() == 0) throw std::invalid_argument("lambda_min: empty matrix");
  return eig_hermitian(a).values(0);
}

// Spectral calculus f(A) for Hermitian A; f may be complex-valued.
inline Matrix apply_spectral(const Matrix& a, const std::function<cplx(double)>& f) {
  const Eigensystem es = eig_hermitian(a);
  Vector fd(es.values.size());
  for (Eigen::Index i = 0; i < es.values.size(); ++i) fd(i) = f(es.values(i));
  return es.vectors * fd.asDiagonal() * es.vectors.adjoint();
}

// Operator (spectral) norm; exact for Hermitian input, via A*A otherwise.
inline double op_norm(const Matrix& a) {
  if (a.size() == 0) return 0.0;
  if (a.rows() == a.cols() && hermitian_defect(a) == 0.0) {
    const Eigensystem es = eig_hermitian(a);
    return std::max(std::abs(es.values(0)), std::abs(es.values(es.values.size() - 1)));
  }
  Eigen::SelfAdjointEigenSolver<Matrix> solver((a.adjoint() * a).eval());
  return std::sqrt(std::max(0.0, solver.eigenvalues().maxCoeff()));
}

inline Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

// Deterministic complex Gaussian data for property tests and probe states.
inline Vector random_vector(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  Vector v(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = cplx(dist(gen), dist(gen));
  return v;
}

inline Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = cplx(dist(gen), dist(gen));
  return m;
}

inline Matrix random_hermitian(std::size_t n, std::uint64_t seed) {
  const Matrix m = random_matrix(n, n, seed);
  return ((m + m.adjoint()) / 2.0).eval();
}

// Gauss-Legendre rule on [-1, 1] via the Jacobi-matrix eigenproblem.
struct Quadrature {
  std::vector<double> nodes;
  std::vector<double> weights;
};

inline Quadrature gauss_legendre(int n) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: order must be positive");
  RealVector diag = RealVector::Zero(n), sub(std::max(0, n - 1));
  for (int i = 1; i < n; ++i) {
    const double b = i / std::sqrt(4.0 * i * i - 1.0);
    sub(i - 1) = b;
  }
  Eigen::SelfAdjointEigenSolver<RealMatrix> solver;
  solver.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("gauss_legendre: tridiagonal eigensolver failed");
  Quadrature q;
  q.nodes.resize(n);
  q.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    q.nodes[i] = solver.eigenvalues()(i);
    const double c = solver.eigenvectors()(0, i);
    q.weights[i] = 2.0 * c * c;
  }
  return q;
}

}  // namespace pflab
