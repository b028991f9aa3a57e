// ladder.hpp — second-quantized operators on truncated occupation bases
#pragma once

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "pflab/basis.hpp"
#include "pflab/sparse.hpp"

namespace pflab::fock {

// a(f): lowers one quantum, antilinear in f. Lowering never leaves the basis.
inline SparseOp annihilation(const OccBasis& basis, const Vector& f) {
  if (static_cast<std::size_t>(f.size()) != basis.mode_count())
    throw std::invalid_argument("annihilation: one-particle vector has wrong mode count");
  std::vector<Entry> entries;
  std::vector<int> target;
  for (std::size_t i = 0; i < basis.dim(); ++i) {
    const std::vector<int>& nu = basis.states[i];
    for (std::size_t j = 0; j < basis.mode_count(); ++j) {
      if (nu[j] == 0 || f(static_cast<Eigen::Index>(j)) == cplx(0.0)) continue;
      target = nu;
      --target[j];
      const std::ptrdiff_t t = basis.index_of(target);
      entries.push_back({static_cast<std::size_t>(t), i,
                         std::conj(f(static_cast<Eigen::Index>(j))) * std::sqrt(double(nu[j]))});
    }
  }
  return make_sparse(basis.dim(), basis.dim(), std::move(entries), basis.id, basis.id);
}

// a*(f): adjoint of a(f) on the truncated space; the top sector is annihilated.
inline SparseOp creation(const OccBasis& basis, const Vector& f) {
  if (static_cast<std::size_t>(f.size()) != basis.mode_count())
    throw std::invalid_argument("creation: one-particle vector has wrong mode count");
  std::vector<Entry> entries;
  std::vector<int> target;
  for (std::size_t i = 0; i < basis.dim(); ++i) {
    const std::vector<int>& nu = basis.states[i];
    for (std::size_t j = 0; j < basis.mode_count(); ++j) {
      if (f(static_cast<Eigen::Index>(j)) == cplx(0.0)) continue;
      target = nu;
      ++target[j];
      const std::ptrdiff_t t = basis.index_of(target);
      if (t < 0) continue;
      entries.push_back({static_cast<std::size_t>(t), i,
                         f(static_cast<Eigen::Index>(j)) * std::sqrt(double(nu[j] + 1))});
    }
  }
  return make_sparse(basis.dim(), basis.dim(), std::move(entries), basis.id, basis.id);
}

// phi(f) = (a(f) + a*(f))/sqrt(2); storage is exactly Hermitian.
inline SparseOp segal_field(const OccBasis& basis, const Vector& f) {
  SparseOp phi = cplx(1.0 / std::sqrt(2.0)) * (annihilation(basis, f) + creation(basis, f));
  return as_hermitian(std::move(phi));
}

// dGamma(h) = sum_{jk} h_jk a*_j a_k; preserves the total-quanta grading.
inline SparseOp dgamma(const OccBasis& basis, const Matrix& h) {
  const std::size_t m = basis.mode_count();
  if (static_cast<std::size_t>(h.rows()) != m || static_cast<std::size_t>(h.cols()) != m)
    throw std::invalid_argument("dgamma: one-particle matrix has wrong mode count");
  std::vector<Entry> entries;
  std::vector<int> target;
  for (std::size_t i = 0; i < basis.dim(); ++i) {
    const std::vector<int>& nu = basis.states[i];
    cplx diag = 0.0;
    for (std::size_t j = 0; j < m; ++j)
      if (nu[j] > 0) diag += h(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j)) *
                             double(nu[j]);
    if (diag != cplx(0.0)) entries.push_back({i, i, diag});
    for (std::size_t k = 0; k < m; ++k) {
      if (nu[k] == 0) continue;
      for (std::size_t j = 0; j < m; ++j) {
        if (j == k) continue;
        const cplx hjk = h(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k));
        if (hjk == cplx(0.0)) continue;
        target = nu;
        --target[k];
        ++target[j];
        const std::ptrdiff_t t = basis.index_of(target);
        if (t < 0) continue;
        entries.push_back({static_cast<std::size_t>(t), i,
                           hjk * std::sqrt(double(nu[k]) * double(nu[j] + 1))});
      }
    }
  }
  SparseOp op = make_sparse(basis.dim(), basis.dim(), std::move(entries), basis.id, basis.id);
  if (hermitian_defect(h) == 0.0) op = as_hermitian(std::move(op));
  return op;
}

inline SparseOp number_op(const OccBasis& basis) {
  std::vector<Entry> entries;
  for (std::size_t i = 0; i < basis.dim(); ++i) {
    const int t = basis.total(i);
    if (t > 0) entries.push_back({i, i, double(t)});
  }
  return make_sparse(basis.dim(), basis.dim(), std::move(entries), basis.id, basis.id, true);
}

// Diagonal 0/1 projector onto total quanta <= max_total.
inline SparseOp grading_projector(const OccBasis& basis, int max_total) {
  std::vector<Entry> entries;
  for (std::size_t i = 0; i < basis.dim(); ++i)
    if (basis.total(i) <= max_total) entries.push_back({i, i, 1.0});
  return make_sparse(basis.dim(), basis.dim(), std::move(entries), basis.id, basis.id, true);
}

namespace detail {

// States ordered by ascending total quanta so column recursions see parents first.
inline std::vector<std::size_t> by_total(const OccBasis& basis) {
  std::vector<std::size_t> order(basis.dim());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return basis.total(a) < basis.total(b);
  });
  return order;
}

inline std::size_t first_occupied(const std::vector<int>& nu) {
  for (std::size_t j = 0; j < nu.size(); ++j)
    if (nu[j] > 0) return j;
  throw std::logic_error("first_occupied: vacuum tuple");
}

struct LiftColumns {
  std::vector<Vector> gamma_cols;    // Gamma(b) columns over the destination basis
  std::vector<Vector> dgamma2_cols;  // dGamma(b,q) columns, empty unless requested
};

// Column recursion for Gamma(b) and dGamma(b,q) between (possibly distinct)
// bases: Gamma(b)a*(f) = a*(bf)Gamma(b) and
// dGamma(b,q)a*(f) = a*(qf)Gamma(b) + a*(bf)dGamma(b,q), seeded on the vacuum.
inline LiftColumns lift_columns(const OccBasis& dst, const OccBasis& src, const Matrix& b,
                                const Matrix* q) {
  const std::size_t msrc = src.mode_count(), mdst = dst.mode_count();
  if (static_cast<std::size_t>(b.rows()) != mdst || static_cast<std::size_t>(b.cols()) != msrc)
    throw std::invalid_argument("gamma: one-particle matrix shape does not match mode counts");
  if (q && (q->rows() != b.rows() || q->cols() != b.cols()))
    throw std::invalid_argument("dgamma2: perturbation matrix shape mismatch");
  std::vector<SparseOp> create_b, create_q;
  for (std::size_t j = 0; j < msrc; ++j) {
    create_b.push_back(creation(dst, b.col(static_cast<Eigen::Index>(j))));
    if (q) create_q.push_back(creation(dst, q->col(static_cast<Eigen::Index>(j))));
  }
  LiftColumns out;
  out.gamma_cols.assign(src.dim(), Vector());
  if (q) out.dgamma2_cols.assign(src.dim(), Vector());
  for (std::size_t i : by_total(src)) {
    const std::vector<int>& nu = src.states[i];
    if (src.total(i) == 0) {
      Vector vac = Vector::Zero(static_cast<Eigen::Index>(dst.dim()));
      std::vector<int> zero(mdst, 0);
      const std::ptrdiff_t v = dst.index_of(zero);
      if (v < 0) throw std::logic_error("gamma: destination basis lacks the vacuum");
      vac(static_cast<Eigen::Index>(v)) = 1.0;
      out.gamma_cols[i] = std::move(vac);
      if (q) out.dgamma2_cols[i] = Vector::Zero(static_cast<Eigen::Index>(dst.dim()));
      continue;
    }
    const std::size_t j = first_occupied(nu);
    std::vector<int> parent = nu;
    --parent[j];
    const std::size_t p = static_cast<std::size_t>(src.index_of(parent));
    const double inv = 1.0 / std::sqrt(double(nu[j]));
    out.gamma_cols[i] = inv * create_b[j].apply(out.gamma_cols[p]);
    if (q)
      out.dgamma2_cols[i] =
          inv * (create_q[j].apply(out.gamma_cols[p]) + create_b[j].apply(out.dgamma2_cols[p]));
  }
  return out;
}

inline SparseOp columns_to_op(const std::vector<Vector>& cols, const OccBasis& dst,
                              const OccBasis& src) {
  std::vector<Entry> entries;
  for (std::size_t i = 0; i < cols.size(); ++i)
    for (Eigen::Index r = 0; r < cols[i].size(); ++r)
      if (cols[i](r) != cplx(0.0))
        entries.push_back({static_cast<std::size_t>(r), i, cols[i](r)});
  return make_sparse(dst.dim(), src.dim(), std::move(entries), dst.id, src.id);
}

}  // namespace detail

// Gamma(b): acts sector-wise as b^(tensor n), compressed to the truncation.
inline SparseOp gamma(const OccBasis& dst, const OccBasis& src, const Matrix& b,
                      double contraction_tol = 1e-12) {
  if (op_norm(b) > 1.0 + contraction_tol)
    throw std::invalid_argument("gamma: one-particle matrix must be a contraction");
  return detail::columns_to_op(detail::lift_columns(dst, src, b, nullptr).gamma_cols, dst, src);
}

inline SparseOp gamma(const OccBasis& basis, const Matrix& b, double contraction_tol = 1e-12) {
  return gamma(basis, basis, b, contraction_tol);
}

// dGamma(b,q): sum over sector slots of b x ... x q x ... x b.
inline SparseOp dgamma2(const OccBasis& dst, const OccBasis& src, const Matrix& b,
                        const Matrix& q, double contraction_tol = 1e-12) {
  if (op_norm(b) > 1.0 + contraction_tol)
    throw std::invalid_argument("dgamma2: reference matrix must be a contraction");
  return detail::columns_to_op(detail::lift_columns(dst, src, b, &q).dgamma2_cols, dst, src);
}

inline SparseOp dgamma2(const OccBasis& basis, const Matrix& b, const Matrix& q,
                        double contraction_tol = 1e-12) {
  return dgamma2(basis, basis, b, q, contraction_tol);
}

// Localized splitting: the canonical unitary lift of k -> (b0 k, binf k) into the
// truncated tensor product, realized over the concatenated mode set (whose
// occupation basis is canonically the tensor-product basis with a joint cap).
struct SplitLocalization {
  OccBasis joint;  // concatenated modes: inner block then outer block
  OccBasis left;
  OccBasis right;
  std::size_t left_mode_count = 0;
  SparseOp map;  // checked Gamma of the stacked matrix, source -> joint
};

namespace detail {
inline ModeSet factor_modes(const OccBasis& src, const Matrix& block, int tag_offset) {
  // Selector rows (single unit entry) inherit the source mode; mixed rows get
  // synthetic labels since a mixture has no canonical frequency.
  ModeSet out;
  for (Eigen::Index r = 0; r < block.rows(); ++r) {
    int hits = 0;
    Eigen::Index where = -1;
    for (Eigen::Index c = 0; c < block.cols(); ++c)
      if (block(r, c) != cplx(0.0)) {
        ++hits;
        where = c;
      }
    if (hits == 1 && block(r, where) == cplx(1.0)) {
      Mode m = src.modes.modes[static_cast<std::size_t>(where)];
      m.reservoir += tag_offset;
      out.modes.push_back(m);
    } else {
      out.modes.push_back({double(r + 1), 1.0, tag_offset});
    }
  }
  return out;
}
}  // namespace detail

inline SplitLocalization split_localize(const OccBasis& basis, const Matrix& b0,
                                        const Matrix& binf, double isometry_tol = 1e-10) {
  const auto m = static_cast<Eigen::Index>(basis.mode_count());
  if (b0.cols() != m || binf.cols() != m)
    throw std::invalid_argument("split_localize: blocks must act on the source modes");
  const Matrix defect = b0.adjoint() * b0 + binf.adjoint() * binf -
                        Matrix::Identity(m, m);
  if (defect.cwiseAbs().maxCoeff() > isometry_tol)
    throw std::invalid_argument("split_localize: blocks do not form an isometry");

  SplitLocalization split;
  split.left_mode_count = static_cast<std::size_t>(b0.rows());
  const ModeSet left_modes = detail::factor_modes(basis, b0, 0);
  int offset = 0;
  for (const Mode& mo : left_modes.modes) offset = std::max(offset, mo.reservoir + 1);
  const ModeSet right_modes = detail::factor_modes(basis, binf, offset);
  ModeSet joint_modes = left_modes;
  joint_modes.modes.insert(joint_modes.modes.end(), right_modes.modes.begin(),
                           right_modes.modes.end());
  split.left = build_basis(left_modes, basis.n_total_max, basis.per_mode_cap);
  split.right = build_basis(right_modes, basis.n_total_max, basis.per_mode_cap);
  split.joint = build_basis(joint_modes, basis.n_total_max, basis.per_mode_cap);

  Matrix stacked(b0.rows() + binf.rows(), m);
  stacked.topRows(b0.rows()) = b0;
  stacked.bottomRows(binf.rows()) = binf;
  split.map = gamma(split.joint, basis, stacked);
  return split;
}

// X (x) 1 and 1 (x) Y on the joint basis, compressed to the joint cap.
inline SparseOp embed_left(const SplitLocalization& split, const SparseOp& x) {
  if (x.rows != split.left.dim() || x.cols != split.left.dim())
    throw std::invalid_argument("embed_left: operator does not act on the left factor");
  std::vector<Entry> entries;
  std::vector<int> target;
  const std::size_t ml = split.left_mode_count;
  const Matrix xd = x.to_dense();
  for (std::size_t i = 0; i < split.joint.dim(); ++i) {
    const std::vector<int>& nu = split.joint.states[i];
    const std::vector<int> lpart(nu.begin(), nu.begin() + static_cast<std::ptrdiff_t>(ml));
    const std::size_t l = static_cast<std::size_t>(split.left.index_of(lpart));
    for (std::size_t lp = 0; lp < split.left.dim(); ++lp) {
      const cplx v = xd(static_cast<Eigen::Index>(lp), static_cast<Eigen::Index>(l));
      if (v == cplx(0.0)) continue;
      target.assign(split.left.states[lp].begin(), split.left.states[lp].end());
      target.insert(target.end(), nu.begin() + static_cast<std::ptrdiff_t>(ml), nu.end());
      const std::ptrdiff_t t = split.joint.index_of(target);
      if (t >= 0) entries.push_back({static_cast<std::size_t>(t), i, v});
    }
  }
  return make_sparse(split.joint.dim(), split.joint.dim(), std::move(entries), split.joint.id,
                     split.joint.id);
}

inline SparseOp embed_right(const SplitLocalization& split, const SparseOp& y) {
  if (y.rows != split.right.dim() || y.cols != split.right.dim())
    throw std::invalid_argument("embed_right: operator does not act on the right factor");
  std::vector<Entry> entries;
  std::vector<int> target;
  const std::size_t ml = split.left_mode_count;
  const Matrix yd = y.to_dense();
  for (std::size_t i = 0; i < split.joint.dim(); ++i) {
    const std::vector<int>& nu = split.joint.states[i];
    const std::vector<int> rpart(nu.begin() + static_cast<std::ptrdiff_t>(ml), nu.end());
    const std::size_t r = static_cast<std::size_t>(split.right.index_of(rpart));
    for (std::size_t rp = 0; rp < split.right.dim(); ++rp) {
      const cplx v = yd(static_cast<Eigen::Index>(rp), static_cast<Eigen::Index>(r));
      if (v == cplx(0.0)) continue;
      target.assign(nu.begin(), nu.begin() + static_cast<std::ptrdiff_t>(ml));
      target.insert(target.end(), split.right.states[rp].begin(), split.right.states[rp].end());
      const std::ptrdiff_t t = split.joint.index_of(target);
      if (t >= 0) entries.push_back({static_cast<std::size_t>(t), i, v});
    }
  }
  return make_sparse(split.joint.dim(), split.joint.dim(), std::move(entries), split.joint.id,
                     split.joint.id);
}

}  // namespace pflab::fock
