#pragma once

#include <cmath>
#include <vector>

#include "cvls/common.hpp"

namespace cvls::train {

struct AdamWConfig {
  double learning_rate = 4e-4;
  double weight_decay = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// AdamW with decoupled weight decay over an ordered list of tensors:
///   m <- b1 m + (1-b1) g,  v <- b2 v + (1-b2) g^2,
///   p <- p - lr (m_hat / (sqrt(v_hat) + eps) + wd p).
template <typename Scalar>
class AdamW {
 public:
  AdamW() = default;
  explicit AdamW(AdamWConfig cfg) : cfg_(cfg) {}

  const AdamWConfig& config() const { return cfg_; }
  void set_learning_rate(double lr) { cfg_.learning_rate = lr; }
  std::int64_t step_count() const { return step_; }

  template <typename PtrList>
  void init_like(const PtrList& tensors) {
    m_.clear();
    v_.clear();
    for (const auto* t : tensors) {
      m_.push_back(Matrix<Scalar>::Zero(t->rows(), t->cols()));
      v_.push_back(Matrix<Scalar>::Zero(t->rows(), t->cols()));
    }
    step_ = 0;
  }

  /// One update; `params` and `grads` must match the init_like order.
  void step(const std::vector<Matrix<Scalar>*>& params,
            const std::vector<Matrix<Scalar>*>& grads) {
    require(m_.size() == params.size() && grads.size() == params.size(),
            "adamw: state/parameter list mismatch");
    for (const auto* g : grads)
      if (!g->allFinite()) throw NumericError("adamw: non-finite gradient, aborting");

    ++step_;
    const Scalar b1 = static_cast<Scalar>(cfg_.beta1);
    const Scalar b2 = static_cast<Scalar>(cfg_.beta2);
    const Scalar lr = static_cast<Scalar>(cfg_.learning_rate);
    const Scalar wd = static_cast<Scalar>(cfg_.weight_decay);
    const Scalar eps = static_cast<Scalar>(cfg_.eps);
    const Scalar bc1 = Scalar(1) - std::pow(b1, static_cast<Scalar>(step_));
    const Scalar bc2 = Scalar(1) - std::pow(b2, static_cast<Scalar>(step_));

    for (std::size_t i = 0; i < params.size(); ++i) {
      Matrix<Scalar>& p = *params[i];
      const Matrix<Scalar>& g = *grads[i];
      m_[i] = b1 * m_[i] + (Scalar(1) - b1) * g;
      v_[i] = b2 * v_[i] + (Scalar(1) - b2) * g.cwiseProduct(g);
      const Matrix<Scalar> m_hat = m_[i] / bc1;
      const Matrix<Scalar> v_hat = v_[i] / bc2;
      p.array() -=
          lr * (m_hat.array() / (v_hat.array().sqrt() + eps) + wd * p.array());
    }
  }

  std::vector<Matrix<Scalar>>& first_moments() { return m_; }
  std::vector<Matrix<Scalar>>& second_moments() { return v_; }
  void restore(std::vector<Matrix<Scalar>> m, std::vector<Matrix<Scalar>> v,
               std::int64_t step) {
    m_ = std::move(m);
    v_ = std::move(v);
    step_ = step;
  }

 private:
  AdamWConfig cfg_;
  std::vector<Matrix<Scalar>> m_, v_;
  std::int64_t step_ = 0;
};

}  // namespace cvls::train
