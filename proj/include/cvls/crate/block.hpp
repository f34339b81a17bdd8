#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "cvls/common.hpp"

namespace cvls::crate {

enum class IstaVariant { kPrinted, kResidual };

/// Learnable tensors and step sizes of one CRATE block. `bases` are the K
/// subspace bases U_k in R^{h x w}; `dict` is the square dictionary D.
template <typename Scalar>
struct BlockParams {
  std::vector<Matrix<Scalar>> bases;
  Matrix<Scalar> dict;
  Scalar kappa = Scalar(0.5);
  Scalar eta = Scalar(0.1);
  Scalar lambda = Scalar(0.1);
  Scalar epsilon = Scalar(0.75);
  IstaVariant ista_variant = IstaVariant::kPrinted;

  int head_dim() const { return bases.empty() ? 0 : static_cast<int>(bases[0].cols()); }
  int feature_dim() const { return static_cast<int>(dict.rows()); }

  void validate(Eigen::Index h) const {
    // kappa = 0 is admitted as the identity-mixing limit
    require(epsilon > Scalar(0) && eta > Scalar(0) && kappa >= Scalar(0),
            "block step sizes must be positive");
    require(dict.rows() == h && dict.cols() == h, "dictionary must be h x h");
    require(!bases.empty(), "block needs at least one subspace basis");
    for (const auto& U : bases)
      require(U.rows() == h && U.cols() == bases[0].cols(),
              "subspace bases must share shape h x w");
  }
};

/// Column-wise softmax, max-shifted.
template <typename Scalar>
Matrix<Scalar> softmax_cols(const Matrix<Scalar>& M) {
  Matrix<Scalar> S(M.rows(), M.cols());
  for (Eigen::Index j = 0; j < M.cols(); ++j) {
    const Scalar mx = M.col(j).maxCoeff();
    S.col(j) = (M.col(j).array() - mx).exp();
    S.col(j) /= S.col(j).sum();
  }
  return S;
}

/// Adjoint of column-wise softmax: dM[:,j] = S[:,j] o (dS[:,j] - <S[:,j], dS[:,j]>).
template <typename Scalar>
Matrix<Scalar> softmax_cols_backward(const Matrix<Scalar>& S, const Matrix<Scalar>& dS) {
  Matrix<Scalar> dM(S.rows(), S.cols());
  for (Eigen::Index j = 0; j < S.cols(); ++j) {
    const Scalar dot = S.col(j).dot(dS.col(j));
    dM.col(j) = S.col(j).array() * (dS.col(j).array() - dot);
  }
  return dM;
}

/// Subspace self-attention: A softmax(A^T A) with A = U_k^T Z.
template <typename Scalar>
Matrix<Scalar> ssa(const Matrix<Scalar>& Z, const Matrix<Scalar>& U_k) {
  require(U_k.rows() == Z.rows(), "ssa: basis rows must match feature dimension");
  const Matrix<Scalar> A = U_k.transpose() * Z;
  return A * softmax_cols<Scalar>(A.transpose() * A);
}

template <typename Scalar>
struct BlockCache {
  Matrix<Scalar> Z_in;
  std::vector<Matrix<Scalar>> A;    // per head, w x N
  std::vector<Matrix<Scalar>> S;    // per head, N x N softmax
  std::vector<Matrix<Scalar>> ssa;  // per head, w x N
  Matrix<Scalar> Z_half;
  Matrix<Scalar> pre_relu;
};

template <typename Scalar>
Scalar mssa_gain(const BlockParams<Scalar>& p, Eigen::Index n_tokens) {
  return Scalar(p.head_dim()) / (Scalar(n_tokens) * p.epsilon * p.epsilon);
}

/// MSSA update: Z_half = (1 - gamma kappa) Z + gamma kappa MSSA(Z|U) with
/// MSSA(Z|U) = gamma [U_1,...,U_K] stack(SSA(Z|U_k)) and gamma = w/(N eps^2).
template <typename Scalar>
Matrix<Scalar> mssa_step(const Matrix<Scalar>& Z, const BlockParams<Scalar>& p,
                         BlockCache<Scalar>* cache = nullptr) {
  p.validate(Z.rows());
  const Scalar gamma = mssa_gain(p, Z.cols());
  const Scalar mix = gamma * p.kappa;

  Matrix<Scalar> attention = Matrix<Scalar>::Zero(Z.rows(), Z.cols());
  if (cache) {
    cache->Z_in = Z;
    cache->A.clear();
    cache->S.clear();
    cache->ssa.clear();
  }
  for (const auto& U : p.bases) {
    Matrix<Scalar> A = U.transpose() * Z;
    Matrix<Scalar> S = softmax_cols<Scalar>(A.transpose() * A);
    Matrix<Scalar> head = A * S;
    attention.noalias() += U * head;
    if (cache) {
      cache->A.push_back(std::move(A));
      cache->S.push_back(std::move(S));
      cache->ssa.push_back(std::move(head));
    }
  }
  Matrix<Scalar> Z_half = (Scalar(1) - mix) * Z + (mix * gamma) * attention;
  if (cache) cache->Z_half = Z_half;
  return Z_half;
}

/// One unrolled proximal step of the non-negative LASSO against D:
/// ReLU(Z - eta D^T (D Z - Z) - eta lambda). The `residual` variant writes the
/// data term as D^T (Z - D Z); the two are algebraically identical after one
/// step from Z itself, and both are kept so either reading can be pinned.
template <typename Scalar>
Matrix<Scalar> ista_step(const Matrix<Scalar>& Z_half, const BlockParams<Scalar>& p,
                         BlockCache<Scalar>* cache = nullptr) {
  p.validate(Z_half.rows());
  const Matrix<Scalar>& D = p.dict;
  Matrix<Scalar> pre;
  if (p.ista_variant == IstaVariant::kPrinted) {
    pre = Z_half - p.eta * (D.transpose() * (D * Z_half - Z_half));
  } else {
    pre = Z_half + p.eta * (D.transpose() * (Z_half - D * Z_half));
  }
  pre.array() -= p.eta * p.lambda;
  if (cache) cache->pre_relu = pre;
  return pre.cwiseMax(Scalar(0));
}

template <typename Scalar>
Matrix<Scalar> crate_block(const Matrix<Scalar>& Z, const BlockParams<Scalar>& p,
                           BlockCache<Scalar>* cache = nullptr) {
  return ista_step<Scalar>(mssa_step<Scalar>(Z, p, cache), p, cache);
}

template <typename Scalar>
struct BlockGrads {
  std::vector<Matrix<Scalar>> bases;
  Matrix<Scalar> dict;

  static BlockGrads zeros_like(const BlockParams<Scalar>& p) {
    BlockGrads g;
    for (const auto& U : p.bases) g.bases.push_back(Matrix<Scalar>::Zero(U.rows(), U.cols()));
    g.dict = Matrix<Scalar>::Zero(p.dict.rows(), p.dict.cols());
    return g;
  }
};

/// Reverse-mode pass through ista_step then mssa_step. Returns dL/dZ_in and
/// accumulates parameter gradients into `grads`.
template <typename Scalar>
Matrix<Scalar> crate_block_backward(const Matrix<Scalar>& dOut,
                                    const BlockParams<Scalar>& p,
                                    const BlockCache<Scalar>& cache,
                                    BlockGrads<Scalar>& grads) {
  require(cache.Z_half.size() > 0 && cache.pre_relu.size() > 0,
          "crate_block_backward: missing forward cache");
  const Matrix<Scalar>& D = p.dict;
  const Matrix<Scalar>& Zh = cache.Z_half;

  // ISTA: out = ReLU(pre), pre = Zh - eta D^T (D Zh - Zh) - eta lambda
  Matrix<Scalar> dPre =
      ((cache.pre_relu.array() > Scalar(0)).template cast<Scalar>() * dOut.array())
          .matrix();
  Matrix<Scalar> P = D * Zh - Zh;
  Matrix<Scalar> DdPre = D * dPre;
  Matrix<Scalar> dZh = dPre - p.eta * (D.transpose() * DdPre - DdPre);
  grads.dict.noalias() -= p.eta * (P * dPre.transpose());
  grads.dict.noalias() -= p.eta * (DdPre * Zh.transpose());

  // MSSA: Zh = (1 - gamma kappa) Z + kappa gamma^2 sum_k U_k SSA_k
  const Scalar gamma = mssa_gain(p, cache.Z_in.cols());
  const Scalar mix = gamma * p.kappa;
  Matrix<Scalar> dZ = (Scalar(1) - mix) * dZh;
  for (std::size_t k = 0; k < p.bases.size(); ++k) {
    const Matrix<Scalar>& U = p.bases[k];
    const Matrix<Scalar>& A = cache.A[k];
    const Matrix<Scalar>& S = cache.S[k];

    grads.bases[k].noalias() += (mix * gamma) * (dZh * cache.ssa[k].transpose());
    Matrix<Scalar> dHead = (mix * gamma) * (U.transpose() * dZh);

    Matrix<Scalar> dA = dHead * S.transpose();
    Matrix<Scalar> dS = A.transpose() * dHead;
    Matrix<Scalar> dM = softmax_cols_backward<Scalar>(S, dS);
    dA.noalias() += A * (dM + dM.transpose());

    grads.bases[k].noalias() += cache.Z_in * dA.transpose();
    dZ.noalias() += U * dA;
  }
  return dZ;
}

}  // namespace cvls::crate
