#pragma once

#include <cmath>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "cvls/crate/network.hpp"
#include "cvls/rco/tensor_io.hpp"
#include "cvls/rng.hpp"
#include "cvls/train/adamw.hpp"
#include "cvls/train/loss.hpp"

namespace cvls::train {

struct TrainConfig {
  // optimizer and loop
  double learning_rate = 4e-4;
  double weight_decay = 0.1;
  double beta1 = 0.9;   // AdamW momentum
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  int batch_size = 256;
  int epochs = 20;
  double mu = 0.1;  // safety-penalty weight
  int k = 4;        // past steps in the input window
  int d_e = 6;      // empty-cell radius: jam spacing 7.5 m floors to cell distance 7
  std::uint64_t seed = 1;
  std::string lr_schedule = "constant";  // or "cosine"

  // architecture
  int hidden = 32;
  int heads = 4;
  int patch = 10;
  int encoder_blocks = 6;
  int decoder_blocks = 4;
  double kappa = 0.5;
  double eta = 0.1;
  double lambda = 0.1;
  double epsilon = 0.75;
  std::string ista_variant = "printed";

  void validate() const {
    require(learning_rate >= 0.0 && weight_decay >= 0.0, "negative optimizer settings");
    require(batch_size >= 1 && epochs >= 1 && k >= 1 && d_e >= 0, "bad loop settings");
    require(mu >= 0.0, "mu must be non-negative");
  }

  AdamWConfig adamw() const { return {learning_rate, weight_decay, beta1, beta2, adam_eps}; }

  crate::CrateConfig crate_config(const rco::GridConfig& grid) const {
    crate::CrateConfig c;
    c.lanes = grid.lanes;
    c.cells = grid.cells();
    c.k = k;
    c.patch = patch;
    c.hidden = hidden;
    c.heads = heads;
    c.encoder_blocks = encoder_blocks;
    c.decoder_blocks = decoder_blocks;
    c.d_e = d_e;
    c.kappa = kappa;
    c.eta = eta;
    c.lambda = lambda;
    c.epsilon = epsilon;
    c.ista_variant = ista_variant == "residual" ? crate::IstaVariant::kResidual
                                                : crate::IstaVariant::kPrinted;
    return c;
  }
};

inline nlohmann::json to_json(const TrainConfig& t) {
  return nlohmann::json{{"learning_rate", t.learning_rate},
                        {"weight_decay", t.weight_decay},
                        {"beta1", t.beta1},
                        {"beta2", t.beta2},
                        {"adam_eps", t.adam_eps},
                        {"batch_size", t.batch_size},
                        {"epochs", t.epochs},
                        {"mu", t.mu},
                        {"k", t.k},
                        {"d_e", t.d_e},
                        {"seed", t.seed},
                        {"lr_schedule", t.lr_schedule},
                        {"hidden", t.hidden},
                        {"heads", t.heads},
                        {"patch", t.patch},
                        {"encoder_blocks", t.encoder_blocks},
                        {"decoder_blocks", t.decoder_blocks},
                        {"kappa", t.kappa},
                        {"eta", t.eta},
                        {"lambda", t.lambda},
                        {"epsilon", t.epsilon},
                        {"ista_variant", t.ista_variant}};
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig t;
  t.learning_rate = j.at("learning_rate");
  t.weight_decay = j.at("weight_decay");
  t.beta1 = j.at("beta1");
  t.beta2 = j.at("beta2");
  t.adam_eps = j.at("adam_eps");
  t.batch_size = j.at("batch_size");
  t.epochs = j.at("epochs");
  t.mu = j.at("mu");
  t.k = j.at("k");
  t.d_e = j.at("d_e");
  t.seed = j.at("seed");
  t.lr_schedule = j.at("lr_schedule");
  t.hidden = j.at("hidden");
  t.heads = j.at("heads");
  t.patch = j.at("patch");
  t.encoder_blocks = j.at("encoder_blocks");
  t.decoder_blocks = j.at("decoder_blocks");
  t.kappa = j.at("kappa");
  t.eta = j.at("eta");
  t.lambda = j.at("lambda");
  t.epsilon = j.at("epsilon");
  t.ista_variant = j.at("ista_variant");
  return t;
}

/// Called after each epoch with the epoch index (0-based), the parameters,
/// and the optimizer (for checkpointing with its state).
using EpochCallback =
    std::function<void(int epoch, crate::CrateParams<float>&, AdamW<float>&, double loss)>;

/// Deterministic epoch loop: seeded shuffling, sequential batch accumulation,
/// one AdamW update per batch. Returns the mean training loss per epoch.
/// `start_epoch` > 0 resumes counting without replaying earlier epochs; the
/// shuffle stream is derived from (seed, epoch), so a resumed run sees the
/// same batches the uninterrupted run would have.
inline std::vector<double> train(const rco::Dataset& data, const TrainConfig& tc,
                                 crate::CrateParams<float>& params, AdamW<float>& opt,
                                 int start_epoch = 0, const EpochCallback& on_epoch = {}) {
  tc.validate();
  require(data.size() > 0, "train: empty dataset");
  require(data.windows.rows() == params.cfg.input_dim(),
          "train: dataset window size does not match architecture");

  auto param_list = [&] {
    std::vector<Matrix<float>*> out;
    for (auto& [name, t] : params.tensors()) out.push_back(t);
    return out;
  }();
  if (opt.step_count() == 0 && opt.first_moments().empty()) opt.init_like(param_list);

  crate::CrateGrads<float> grads = crate::CrateGrads<float>::zeros_like(params);
  crate::CrateGrads<float> sample_grads = crate::CrateGrads<float>::zeros_like(params);
  const auto grad_list = grads.tensors();

  std::vector<double> history;
  std::vector<Eigen::Index> order(static_cast<std::size_t>(data.size()));
  const int lanes = params.cfg.lanes;
  const int cells = params.cfg.cells;

  const double lr0 = tc.learning_rate;
  for (int epoch = start_epoch; epoch < tc.epochs; ++epoch) {
    if (tc.lr_schedule == "cosine") {
      const double f = 0.5 * (1.0 + std::cos(3.14159265358979323846 * epoch /
                                             std::max(1, tc.epochs - 1)));
      opt.set_learning_rate(lr0 * f);
    }

    std::iota(order.begin(), order.end(), Eigen::Index(0));
    RngStream shuffle = RngStream::derive(tc.seed, "shuffle", static_cast<std::uint64_t>(epoch));
    shuffle.shuffle(order);

    double epoch_loss = 0.0;
    for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(tc.batch_size)) {
      const std::size_t end = std::min(order.size(), b + static_cast<std::size_t>(tc.batch_size));
      const auto bsize = static_cast<float>(end - b);
      grads.setZero();
      for (std::size_t s = b; s < end; ++s) {
        const Eigen::Index idx = order[s];
        crate::ForwardCache<float> cache;
        const VectorF x = data.windows.col(idx);
        const crate::RawOutput<float> raw = crate::forward<float>(x, params, &cache);
        const MatrixF target = data.targets.col(idx).reshaped(2, Eigen::Index(lanes) * cells);
        LossResult<float> loss = total_loss<float>(raw, target, static_cast<float>(tc.mu),
                                                   tc.d_e, lanes, cells);
        epoch_loss += loss.value;
        sample_grads.setZero();
        crate::backward<float>(loss.grad, params, cache, sample_grads);
        grads.add_scaled(sample_grads, 1.0f / bsize);
      }
      opt.step(param_list, grad_list);
    }
    epoch_loss /= static_cast<double>(data.size());
    history.push_back(epoch_loss);
    if (on_epoch) on_epoch(epoch, params, opt, epoch_loss);
  }
  return history;
}

}  // namespace cvls::train
