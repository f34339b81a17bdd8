#pragma once

#include <cmath>
#include <vector>

#include "cvls/common.hpp"

namespace cvls::crate {

/// R(Z) = 1/2 log det(I + h/(N eps^2) Z Z^T) for Z in R^{h x N}.
/// Evaluated on the smaller Gram side (det(I + c A B) = det(I + c B A)) via a
/// Cholesky factorization with a tiny diagonal jitter; log det is the sum of
/// log factors, which stays finite where a direct determinant would overflow.
template <typename Scalar>
Scalar coding_rate(const Matrix<Scalar>& Z, Scalar epsilon) {
  require(epsilon > Scalar(0), "epsilon must be positive");
  if (!Z.allFinite()) throw NumericError("coding_rate: non-finite feature map");
  const Eigen::Index h = Z.rows();
  const Eigen::Index n = Z.cols();
  if (h == 0 || n == 0) return Scalar(0);
  const Scalar alpha = Scalar(h) / (Scalar(n) * epsilon * epsilon);

  Matrix<Scalar> G;
  if (h <= n)
    G = alpha * (Z * Z.transpose());
  else
    G = alpha * (Z.transpose() * Z);
  // diagonal is >= 1, so the jitter is a purely relative safeguard
  G.diagonal().array() += Scalar(1) + Scalar(1e-12);

  Eigen::LLT<Matrix<Scalar>> llt(G);
  if (llt.info() != Eigen::Success)
    throw NumericError("coding_rate: Gram matrix not positive definite");
  Scalar logdet = Scalar(0);
  for (Eigen::Index i = 0; i < llt.matrixL().rows(); ++i)
    logdet += std::log(llt.matrixL()(i, i));
  return logdet;  // 1/2 * (2 * sum log diag(L))
}

/// Delta R(Z; U_[K]) = R(Z) - sum_k R(U_k^T Z). Each projected map uses its
/// own row count in the log det scaling.
template <typename Scalar>
Scalar coding_rate_reduction(const Matrix<Scalar>& Z,
                             const std::vector<Matrix<Scalar>>& bases, Scalar epsilon) {
  Scalar projected = Scalar(0);
  for (const auto& U : bases) {
    require(U.rows() == Z.rows(), "subspace basis rows must match feature dimension");
    projected += coding_rate<Scalar>(U.transpose() * Z, epsilon);
  }
  return coding_rate(Z, epsilon) - projected;
}

}  // namespace cvls::crate
