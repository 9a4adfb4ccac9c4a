#pragma once

#include <optional>
#include <vector>

#include <Eigen/Core>

namespace dpd {

/// One Householder reflection I - 2 vv^T (v unit), applied to the trailing
/// coordinates starting at `offset`. Reflections are involutions.
struct Reflector {
  Eigen::VectorXd v;
  int offset = 0;

  void apply(Eigen::VectorXd& x) const;
};

/// Builds the reflector mapping a -> b (and b -> a) for ||a|| == ||b||,
/// a != b. Throws std::invalid_argument on norm mismatch or a == b.
Reflector householder(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

/// Ordered product of reflectors acting on one side of a factorization.
struct ReflectorChain {
  std::vector<Reflector> refl;
  int dim = 0;

  void apply_forward(Eigen::VectorXd& x) const;   // refl[0] first
  void apply_backward(Eigen::VectorXd& x) const;  // refl.back() first
};

/// G = U * [Lambda | 0] * V with U (n x n) and V (p x p) kept in
/// multiplicative reflector form and Lambda (n x n) lower bidiagonal.
struct BidiagFactorization {
  ReflectorChain u_chain;  // left reflectors, n-dimensional
  ReflectorChain v_chain;  // right reflectors, p-dimensional
  Eigen::MatrixXd lambda;  // n x n, main + first sub-diagonal
  int n = 0;
  int p = 0;

  Eigen::VectorXd apply_u(Eigen::VectorXd x) const;
  Eigen::VectorXd apply_ut(Eigen::VectorXd x) const;
  Eigen::VectorXd apply_v(Eigen::VectorXd x) const;
  Eigen::VectorXd apply_vt(Eigen::VectorXd x) const;

  /// Dense reconstruction, for verification only.
  Eigen::MatrixXd reconstruct() const;
};

/// One-sided bidiagonalization of a short-fat matrix (p > n >= 1): n steps,
/// each right-reflecting the leading row onto a multiple of e1 and then
/// left-reflecting the leading column of the trailing block. Zero rows or
/// columns skip their reflection.
BidiagFactorization bidiagonalize(const Eigen::MatrixXd& g);

/// Solves (c * G G^T + s * I) x = rhs through the factorization: the middle
/// matrix c * Lambda Lambda^T + s * I is tridiagonal and solved by a banded
/// Cholesky factorization.
Eigen::VectorXd bidiag_solve(const BidiagFactorization& f, double c, double s,
                             const Eigen::VectorXd& rhs);

/// Sherman--Morrison--Woodbury solve of B x = rhs with
/// B = scale * (I + gamma * G G^T), G an n x p matrix with p <= n:
/// only the p x p matrix I_p + gamma G^T G is factorized.
/// p == 0 degenerates to rhs / scale. Throws std::runtime_error if the
/// inner factorization fails.
Eigen::VectorXd smw_solve(const Eigen::MatrixXd& g, double gamma, double scale,
                          const Eigen::VectorXd& rhs);

/// Cholesky solve of a symmetric system; returns nullopt when A is not
/// positive definite (the caller raises damping).
std::optional<Eigen::VectorXd> cholesky_solve(const Eigen::MatrixXd& a,
                                              const Eigen::VectorXd& rhs);

}  // namespace dpd
