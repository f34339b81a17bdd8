#pragma once

#include <cmath>

#include "cvls/crate/network.hpp"
#include "cvls/rco/grid.hpp"

namespace cvls::train {

/// Targets as a [2 x cells] matrix matching the raw-output layout:
/// row 0 occupancy in {0,1}, row 1 normalized speed (-1 on empty cells).
template <typename Scalar>
Matrix<Scalar> target_from_frame(const rco::RCOFrame& f) {
  const int L = f.lanes() * f.cells();
  Matrix<Scalar> t(2, L);
  for (int l = 0; l < f.lanes(); ++l)
    for (int c = 0; c < f.cells(); ++c) {
      t(0, l * f.cells() + c) = static_cast<Scalar>(f.occ(l, c));
      t(1, l * f.cells() + c) = static_cast<Scalar>(f.spd(l, c));
    }
  return t;
}

template <typename Scalar>
struct LossResult {
  Scalar value = Scalar(0);
  crate::RawOutput<Scalar> grad;  // dL/d(raw output)
};

/// Mean square error over all 2*lanes*cells entries. The occupancy channel is
/// compared as a probability (sigmoid of the logit) against {0,1}; the speed
/// channel directly against the normalized target. The gradient is taken with
/// respect to the raw output, so the occupancy part chains through the
/// sigmoid.
template <typename Scalar>
LossResult<Scalar> mse_loss(const crate::RawOutput<Scalar>& raw,
                            const Matrix<Scalar>& target) {
  require(raw.rows() == 2 && target.rows() == 2 && raw.cols() == target.cols(),
          "mse_loss: raw/target shape mismatch");
  const Eigen::Index L = raw.cols();
  const Scalar m = Scalar(2 * L);
  LossResult<Scalar> res;
  res.grad = crate::RawOutput<Scalar>::Zero(2, L);
  for (Eigen::Index i = 0; i < L; ++i) {
    const Scalar p = crate::sigmoid(raw(0, i));
    const Scalar d_occ = p - target(0, i);
    const Scalar d_spd = raw(1, i) - target(1, i);
    res.value += d_occ * d_occ + d_spd * d_spd;
    res.grad(0, i) = Scalar(2) / m * d_occ * p * (Scalar(1) - p);
    res.grad(1, i) = Scalar(2) / m * d_spd;
  }
  res.value /= m;
  return res;
}

/// Nearby location sum: occupancy summed over the 2*d_e+1 window centered on
/// an occupied cell, clipped at the lane boundaries.
template <typename Scalar>
Scalar nls(const Matrix<Scalar>& occ, Eigen::Index lane, Eigen::Index cell, int d_e) {
  require(lane >= 0 && lane < occ.rows() && cell >= 0 && cell < occ.cols(),
          "nls: cell outside grid");
  require(occ(lane, cell) > Scalar(0.5), "nls: center cell must be occupied");
  Scalar sum = Scalar(0);
  const Eigen::Index lo = std::max<Eigen::Index>(0, cell - d_e);
  const Eigen::Index hi = std::min<Eigen::Index>(occ.cols() - 1, cell + d_e);
  for (Eigen::Index j = lo; j <= hi; ++j) sum += occ(lane, j);
  return sum;
}

template <typename Scalar>
struct PenaltyResult {
  Scalar value = Scalar(0);
  Matrix<Scalar> grad;  // dL_p / d(occupancy probability)
};

/// L_p = sum over lanes and occupied cells of (NLS - 1)^2. The occupied set
/// is the cells with probability above 0.5 and is held fixed under
/// differentiation; NLS itself is computed on the continuous probabilities,
/// so the gradient flows through the window sums.
template <typename Scalar>
PenaltyResult<Scalar> safety_penalty(const Matrix<Scalar>& prob, int d_e) {
  PenaltyResult<Scalar> res;
  res.grad = Matrix<Scalar>::Zero(prob.rows(), prob.cols());
  for (Eigen::Index l = 0; l < prob.rows(); ++l)
    for (Eigen::Index i = 0; i < prob.cols(); ++i) {
      if (!(prob(l, i) > Scalar(0.5))) continue;
      const Scalar s = nls(prob, l, i, d_e) - Scalar(1);
      res.value += s * s;
      const Eigen::Index lo = std::max<Eigen::Index>(0, i - d_e);
      const Eigen::Index hi = std::min<Eigen::Index>(prob.cols() - 1, i + d_e);
      for (Eigen::Index j = lo; j <= hi; ++j) res.grad(l, j) += Scalar(2) * s;
    }
  return res;
}

/// L = L_M + mu * L_p, gradient with respect to the raw output.
template <typename Scalar>
LossResult<Scalar> total_loss(const crate::RawOutput<Scalar>& raw,
                              const Matrix<Scalar>& target, Scalar mu, int d_e, int lanes,
                              int cells) {
  require(raw.cols() == Eigen::Index(lanes) * cells, "total_loss: grid shape mismatch");
  LossResult<Scalar> res = mse_loss(raw, target);
  if (mu == Scalar(0)) return res;

  Matrix<Scalar> prob(lanes, cells);
  for (int l = 0; l < lanes; ++l)
    for (int c = 0; c < cells; ++c)
      prob(l, c) = crate::sigmoid(raw(0, l * cells + c));
  PenaltyResult<Scalar> pen = safety_penalty(prob, d_e);
  res.value += mu * pen.value;
  for (int l = 0; l < lanes; ++l)
    for (int c = 0; c < cells; ++c) {
      const Scalar p = prob(l, c);
      res.grad(0, l * cells + c) += mu * pen.grad(l, c) * p * (Scalar(1) - p);
    }
  return res;
}

}  // namespace cvls::train
