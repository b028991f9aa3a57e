// sparse.hpp — canonical sparse complex operators with basis provenance
#pragma once

#include <Eigen/Sparse>
#include <algorithm>
#include <stdexcept>
#include <string>
#include <vector>

#include "pflab/linalg.hpp"

namespace pflab::fock {

struct Entry {
  std::size_t row = 0;
  std::size_t col = 0;
  cplx val = 0.0;
};

// Sparse operator between truncated bases. Entries are kept row-major sorted,
// duplicate-free and zero-free, so equal assemblies compare byte-for-byte.
struct SparseOp {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<Entry> entries;
  bool hermitian = false;
  std::string range_id;   // basis the output lives in
  std::string domain_id;  // basis the input lives in

  std::size_t dim() const {
    if (rows != cols)
      throw std::logic_error("SparseOp: dim() called on a rectangular operator");
    return rows;
  }
  const std::string& basis_id() const {
    if (range_id != domain_id)
      throw std::logic_error("SparseOp: basis_id() called on a basis-changing operator");
    return domain_id;
  }

  void canonicalize() {
    for (const Entry& e : entries)
      if (e.row >= rows || e.col >= cols)
        throw std::invalid_argument("SparseOp: entry index out of range");
    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
      return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    std::vector<Entry> merged;
    merged.reserve(entries.size());
    for (const Entry& e : entries) {
      if (!merged.empty() && merged.back().row == e.row && merged.back().col == e.col)
        merged.back().val += e.val;
      else
        merged.push_back(e);
    }
    merged.erase(std::remove_if(merged.begin(), merged.end(),
                                [](const Entry& e) { return e.val == cplx(0.0, 0.0); }),
                 merged.end());
    entries = std::move(merged);
  }

  double hermitian_defect() const {
    SparseOp diff = *this;
    for (Entry& e : diff.entries) {
      std::swap(e.row, e.col);
      e.val = -std::conj(e.val);
    }
    diff.canonicalize();
    SparseOp sum = diff;
    sum.entries.insert(sum.entries.end(), entries.begin(), entries.end());
    sum.canonicalize();
    double defect = 0.0;
    for (const Entry& e : sum.entries) defect = std::max(defect, std::abs(e.val));
    return defect;
  }

  Matrix to_dense() const {
    Matrix m = Matrix::Zero(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (const Entry& e : entries)
      m(static_cast<Eigen::Index>(e.row), static_cast<Eigen::Index>(e.col)) += e.val;
    return m;
  }

  Eigen::SparseMatrix<cplx> to_eigen() const {
    Eigen::SparseMatrix<cplx> m(static_cast<Eigen::Index>(rows),
                                static_cast<Eigen::Index>(cols));
    std::vector<Eigen::Triplet<cplx>> trips;
    trips.reserve(entries.size());
    for (const Entry& e : entries)
      trips.emplace_back(static_cast<int>(e.row), static_cast<int>(e.col), e.val);
    m.setFromTriplets(trips.begin(), trips.end());
    return m;
  }

  Vector apply(const Vector& x) const {
    if (static_cast<std::size_t>(x.size()) != cols)
      throw std::invalid_argument("SparseOp: vector dimension mismatch");
    Vector y = Vector::Zero(static_cast<Eigen::Index>(rows));
    for (const Entry& e : entries)
      y(static_cast<Eigen::Index>(e.row)) += e.val * x(static_cast<Eigen::Index>(e.col));
    return y;
  }

  double max_abs() const {
    double m = 0.0;
    for (const Entry& e : entries) m = std::max(m, std::abs(e.val));
    return m;
  }
};

inline SparseOp make_sparse(std::size_t rows, std::size_t cols, std::vector<Entry> entries,
                            const std::string& range_id, const std::string& domain_id,
                            bool hermitian = false) {
  SparseOp op;
  op.rows = rows;
  op.cols = cols;
  op.entries = std::move(entries);
  op.range_id = range_id;
  op.domain_id = domain_id;
  op.canonicalize();
  op.hermitian = hermitian;
  if (hermitian && op.hermitian_defect() != 0.0)
    throw std::invalid_argument("make_sparse: hermitian flag set but storage is not symmetric");
  return op;
}

inline SparseOp from_dense(const Matrix& m, const std::string& range_id,
                           const std::string& domain_id, double drop_tol = 0.0) {
  std::vector<Entry> entries;
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      if (std::abs(m(i, j)) > drop_tol)
        entries.push_back({static_cast<std::size_t>(i), static_cast<std::size_t>(j), m(i, j)});
  SparseOp op = make_sparse(static_cast<std::size_t>(m.rows()),
                            static_cast<std::size_t>(m.cols()), std::move(entries), range_id,
                            domain_id);
  op.hermitian = (m.rows() == m.cols()) && op.hermitian_defect() == 0.0;
  return op;
}

inline SparseOp identity_op(std::size_t n, const std::string& basis_id) {
  std::vector<Entry> entries(n);
  for (std::size_t i = 0; i < n; ++i) entries[i] = {i, i, 1.0};
  return make_sparse(n, n, std::move(entries), basis_id, basis_id, true);
}

namespace detail {
inline void require_same_shape(const SparseOp& a, const SparseOp& b, const char* what) {
  if (a.rows != b.rows || a.cols != b.cols || a.range_id != b.range_id ||
      a.domain_id != b.domain_id)
    throw std::invalid_argument(std::string(what) + ": operator basis/shape mismatch");
}
}  // namespace detail

inline SparseOp operator+(const SparseOp& a, const SparseOp& b) {
  detail::require_same_shape(a, b, "SparseOp addition");
  SparseOp out = a;
  out.entries.insert(out.entries.end(), b.entries.begin(), b.entries.end());
  out.canonicalize();
  out.hermitian = a.hermitian && b.hermitian;
  return out;
}

inline SparseOp operator*(cplx s, const SparseOp& a) {
  SparseOp out = a;
  for (Entry& e : out.entries) e.val *= s;
  out.canonicalize();
  out.hermitian = a.hermitian && s.imag() == 0.0;
  return out;
}

inline SparseOp operator-(const SparseOp& a, const SparseOp& b) { return a + (cplx(-1.0) * b); }

inline SparseOp adjoint(const SparseOp& a) {
  SparseOp out;
  out.rows = a.cols;
  out.cols = a.rows;
  out.range_id = a.domain_id;
  out.domain_id = a.range_id;
  out.entries.reserve(a.entries.size());
  for (const Entry& e : a.entries) out.entries.push_back({e.col, e.row, std::conj(e.val)});
  out.canonicalize();
  out.hermitian = a.hermitian;
  return out;
}

inline SparseOp operator*(const SparseOp& a, const SparseOp& b) {
  if (a.cols != b.rows || a.domain_id != b.range_id)
    throw std::invalid_argument("SparseOp product: inner basis mismatch");
  Eigen::SparseMatrix<cplx> prod = (a.to_eigen() * b.to_eigen()).pruned();
  SparseOp out;
  out.rows = a.rows;
  out.cols = b.cols;
  out.range_id = a.range_id;
  out.domain_id = b.domain_id;
  for (int k = 0; k < prod.outerSize(); ++k)
    for (Eigen::SparseMatrix<cplx>::InnerIterator it(prod, k); it; ++it)
      out.entries.push_back({static_cast<std::size_t>(it.row()),
                             static_cast<std::size_t>(it.col()), it.value()});
  out.canonicalize();
  return out;
}

inline SparseOp commutator(const SparseOp& a, const SparseOp& b) { return a * b - b * a; }

// Marks the operator Hermitian after verifying the storage is exactly symmetric.
inline SparseOp as_hermitian(SparseOp op) {
  if (op.rows != op.cols || op.range_id != op.domain_id)
    throw std::invalid_argument("as_hermitian: operator is not square on one basis");
  if (op.hermitian_defect() != 0.0)
    throw std::invalid_argument("as_hermitian: storage symmetry defect is nonzero");
  op.hermitian = true;
  return op;
}

}  // namespace pflab::fock
