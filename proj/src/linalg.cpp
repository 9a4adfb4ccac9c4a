#include "dpd/linalg.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Cholesky>

namespace dpd {

using Eigen::MatrixXd;
using Eigen::VectorXd;

void Reflector::apply(VectorXd& x) const {
  auto seg = x.segment(offset, v.size());
  seg -= 2.0 * v.dot(seg) * v;
}

Reflector householder(const VectorXd& a, const VectorXd& b) {
  if (a.size() != b.size()) throw std::invalid_argument("householder: size mismatch");
  const double na = a.norm();
  const double nb = b.norm();
  if (std::abs(na - nb) > 1e-12 * std::max(1.0, std::max(na, nb))) {
    throw std::invalid_argument("householder: norms differ");
  }
  VectorXd w = b - a;
  const double nw = w.norm();
  if (nw == 0.0) throw std::invalid_argument("householder: a == b");
  Reflector r;
  r.v = w / nw;
  r.offset = 0;
  return r;
}

void ReflectorChain::apply_forward(VectorXd& x) const {
  for (const Reflector& r : refl) r.apply(x);
}

void ReflectorChain::apply_backward(VectorXd& x) const {
  for (auto it = refl.rbegin(); it != refl.rend(); ++it) it->apply(x);
}

// G = L_1 ... L_q [Lambda | 0] R_q ... R_1 with the left reflectors stored
// L_1..L_q in u_chain and the right ones R_1..R_q' in v_chain.
VectorXd BidiagFactorization::apply_u(VectorXd x) const {
  u_chain.apply_backward(x);
  return x;
}

VectorXd BidiagFactorization::apply_ut(VectorXd x) const {
  u_chain.apply_forward(x);
  return x;
}

VectorXd BidiagFactorization::apply_v(VectorXd x) const {
  v_chain.apply_forward(x);
  return x;
}

VectorXd BidiagFactorization::apply_vt(VectorXd x) const {
  v_chain.apply_backward(x);
  return x;
}

MatrixXd BidiagFactorization::reconstruct() const {
  MatrixXd g = MatrixXd::Zero(n, p);
  for (int j = 0; j < p; ++j) {
    VectorXd ej = VectorXd::Unit(p, j);
    VectorXd vj = apply_v(ej);
    VectorXd mid = lambda * vj.head(n);
    g.col(j) = apply_u(mid);
  }
  return g;
}

namespace {

// Reflector (within the trailing subspace starting at `offset`) mapping the
// given subvector onto +-||a|| e1, sign chosen so <a, b> <= 0. Returns false
// when the subvector is already such a multiple (reflection skipped).
bool make_axis_reflector(const VectorXd& sub, int offset, Reflector& out) {
  const double norm = sub.norm();
  if (norm == 0.0) return false;
  VectorXd b = VectorXd::Zero(sub.size());
  b[0] = (sub[0] > 0.0) ? -norm : norm;
  VectorXd w = b - sub;
  const double nw = w.norm();
  if (nw == 0.0) return false;
  out.v = w / nw;
  out.offset = offset;
  return true;
}

}  // namespace

BidiagFactorization bidiagonalize(const MatrixXd& g) {
  const int n = static_cast<int>(g.rows());
  const int p = static_cast<int>(g.cols());
  if (n < 1 || p <= n) throw std::invalid_argument("bidiagonalize: need p > n >= 1");
  if (!g.allFinite()) throw std::invalid_argument("bidiagonalize: non-finite input");

  BidiagFactorization f;
  f.n = n;
  f.p = p;
  f.u_chain.dim = n;
  f.v_chain.dim = p;
  MatrixXd a = g;

  for (int i = 0; i < n; ++i) {
    // Right reflector: map row i (columns i..p-1) onto a multiple of e1.
    {
      VectorXd row = a.row(i).segment(i, p - i).transpose();
      Reflector r;
      if (make_axis_reflector(row, i, r)) {
        // A <- A * H: transform every row.
        for (int rr = i; rr < n; ++rr) {
          VectorXd full = a.row(rr).transpose();
          r.apply(full);
          a.row(rr) = full.transpose();
        }
        f.v_chain.refl.push_back(std::move(r));
      }
    }
    // Left reflector: map column i (rows i+1..n-1) onto a multiple of e1.
    if (i + 1 < n) {
      VectorXd col = a.col(i).segment(i + 1, n - 1 - i);
      Reflector r;
      if (make_axis_reflector(col, i + 1, r)) {
        for (int cc = i; cc < p; ++cc) {
          VectorXd full = a.col(cc);
          r.apply(full);
          a.col(cc) = full;
        }
        f.u_chain.refl.push_back(std::move(r));
      }
    }
  }
  f.lambda = a.leftCols(n);
  // Keep only the two stored diagonals exactly.
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      if (c != r && c != r - 1) f.lambda(r, c) = 0.0;
    }
  }
  return f;
}

VectorXd bidiag_solve(const BidiagFactorization& f, double c, double s,
                      const VectorXd& rhs) {
  if (rhs.size() != f.n) throw std::invalid_argument("bidiag_solve: size mismatch");
  if (!(s > 0.0)) throw std::invalid_argument("bidiag_solve: s must be positive");
  // B = U (c Lambda Lambda^T + s I) U^T; the middle matrix is tridiagonal.
  const int n = f.n;
  VectorXd diag(n), sub(std::max(0, n - 1));
  for (int i = 0; i < n; ++i) {
    double d2 = f.lambda(i, i) * f.lambda(i, i);
    if (i >= 1) d2 += f.lambda(i, i - 1) * f.lambda(i, i - 1);
    diag[i] = c * d2 + s;
    if (i + 1 < n) sub[i] = c * f.lambda(i + 1, i) * f.lambda(i, i);
  }
  // Banded Cholesky: T = L L^T with bidiagonal L.
  VectorXd ld(n), ls(std::max(0, n - 1));
  for (int i = 0; i < n; ++i) {
    double v = diag[i];
    if (i >= 1) v -= ls[i - 1] * ls[i - 1];
    if (!(v > 0.0)) throw std::runtime_error("bidiag_solve: factorization failed");
    ld[i] = std::sqrt(v);
    if (i + 1 < n) ls[i] = sub[i] / ld[i];
  }
  VectorXd y = f.apply_ut(rhs);
  for (int i = 0; i < n; ++i) {
    double v = y[i];
    if (i >= 1) v -= ls[i - 1] * y[i - 1];
    y[i] = v / ld[i];
  }
  for (int i = n - 1; i >= 0; --i) {
    double v = y[i];
    if (i + 1 < n) v -= ls[i] * y[i + 1];
    y[i] = v / ld[i];
  }
  return f.apply_u(y);
}

VectorXd smw_solve(const MatrixXd& g, double gamma, double scale,
                   const VectorXd& rhs) {
  if (!(scale > 0.0)) throw std::invalid_argument("smw_solve: scale must be positive");
  const int p = static_cast<int>(g.cols());
  if (p == 0) return rhs / scale;
  if (g.rows() != rhs.size()) throw std::invalid_argument("smw_solve: size mismatch");
  if (g.cols() > g.rows()) throw std::invalid_argument("smw_solve: need p <= n");
  MatrixXd inner = MatrixXd::Identity(p, p) + gamma * (g.transpose() * g);
  Eigen::LLT<MatrixXd> llt(inner);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("smw_solve: inner factorization failed");
  }
  VectorXd gt_rhs = g.transpose() * rhs;
  VectorXd sol = llt.solve(gt_rhs);
  return (rhs - gamma * (g * sol)) / scale;
}

std::optional<VectorXd> cholesky_solve(const MatrixXd& a, const VectorXd& rhs) {
  if (a.rows() != a.cols() || a.rows() != rhs.size()) {
    throw std::invalid_argument("cholesky_solve: size mismatch");
  }
  Eigen::LLT<MatrixXd> llt(a);
  if (llt.info() != Eigen::Success) return std::nullopt;
  return llt.solve(rhs);
}

}  // namespace dpd
