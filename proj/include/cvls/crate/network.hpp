#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "cvls/crate/block.hpp"
#include "cvls/rco/grid.hpp"
#include "cvls/rng.hpp"

namespace cvls::crate {

/// Architecture shape and per-block step sizes. `patch` contiguous cells form
/// one token, so a [lanes x cells x 2k] window becomes N = lanes*cells/patch
/// tokens of dimension `hidden`.
struct CrateConfig {
  int lanes = 1;
  int cells = 200;
  int k = 4;
  int patch = 10;
  int hidden = 32;
  int heads = 4;
  int encoder_blocks = 6;
  int decoder_blocks = 4;
  int d_e = 6;
  double kappa = 0.5;
  double eta = 0.1;
  double lambda = 0.1;
  double epsilon = 0.75;
  IstaVariant ista_variant = IstaVariant::kPrinted;

  int tokens() const { return lanes * cells / patch; }
  int token_in_dim() const { return patch * 2 * k; }
  int token_out_dim() const { return patch * 2; }
  int total_cells() const { return lanes * cells; }
  int input_dim() const { return total_cells() * 2 * k; }

  void validate() const {
    require(cells % patch == 0, "cells must be divisible by the patch size");
    require(hidden % heads == 0, "hidden dimension must be divisible by heads");
    require(k >= 1 && lanes >= 1 && hidden >= 1 && heads >= 1, "bad architecture shape");
    require(encoder_blocks >= 1 && decoder_blocks >= 0, "bad block counts");
    require(d_e >= 0, "d_e must be non-negative");
  }
};

template <typename Scalar>
struct CrateParams {
  CrateConfig cfg;
  Matrix<Scalar> input_weight;   // [hidden x token_in_dim]
  Matrix<Scalar> input_bias;     // [hidden x 1]
  std::vector<BlockParams<Scalar>> encoder;
  std::vector<BlockParams<Scalar>> decoder;
  Matrix<Scalar> output_weight;  // [token_out_dim x hidden]
  Matrix<Scalar> output_bias;    // [token_out_dim x 1]

  /// All learnable tensors in declaration order (checkpoint and optimizer
  /// order is defined by this list).
  std::vector<std::pair<std::string, Matrix<Scalar>*>> tensors() {
    std::vector<std::pair<std::string, Matrix<Scalar>*>> out;
    out.push_back({"input_fc.weight", &input_weight});
    out.push_back({"input_fc.bias", &input_bias});
    auto add_blocks = [&out](const std::string& prefix,
                             std::vector<BlockParams<Scalar>>& blocks) {
      for (std::size_t b = 0; b < blocks.size(); ++b) {
        for (std::size_t k = 0; k < blocks[b].bases.size(); ++k)
          out.push_back({prefix + "." + std::to_string(b) + ".basis." + std::to_string(k),
                         &blocks[b].bases[k]});
        out.push_back({prefix + "." + std::to_string(b) + ".dict", &blocks[b].dict});
      }
    };
    add_blocks("encoder", encoder);
    add_blocks("decoder", decoder);
    out.push_back({"output_fc.weight", &output_weight});
    out.push_back({"output_fc.bias", &output_bias});
    return out;
  }

  std::size_t parameter_count() {
    std::size_t n = 0;
    for (auto& [name, t] : tensors()) n += static_cast<std::size_t>(t->size());
    return n;
  }
};

/// Gradients with the same shape as CrateParams.
template <typename Scalar>
struct CrateGrads {
  Matrix<Scalar> input_weight, input_bias;
  std::vector<BlockGrads<Scalar>> encoder, decoder;
  Matrix<Scalar> output_weight, output_bias;

  static CrateGrads zeros_like(CrateParams<Scalar>& p) {
    CrateGrads g;
    g.input_weight = Matrix<Scalar>::Zero(p.input_weight.rows(), p.input_weight.cols());
    g.input_bias = Matrix<Scalar>::Zero(p.input_bias.rows(), 1);
    for (auto& b : p.encoder) g.encoder.push_back(BlockGrads<Scalar>::zeros_like(b));
    for (auto& b : p.decoder) g.decoder.push_back(BlockGrads<Scalar>::zeros_like(b));
    g.output_weight = Matrix<Scalar>::Zero(p.output_weight.rows(), p.output_weight.cols());
    g.output_bias = Matrix<Scalar>::Zero(p.output_bias.rows(), 1);
    return g;
  }

  std::vector<Matrix<Scalar>*> tensors() {
    std::vector<Matrix<Scalar>*> out;
    out.push_back(&input_weight);
    out.push_back(&input_bias);
    auto add = [&out](std::vector<BlockGrads<Scalar>>& blocks) {
      for (auto& b : blocks) {
        for (auto& U : b.bases) out.push_back(&U);
        out.push_back(&b.dict);
      }
    };
    add(encoder);
    add(decoder);
    out.push_back(&output_weight);
    out.push_back(&output_bias);
    return out;
  }

  void setZero() {
    for (auto* t : tensors()) t->setZero();
  }

  void add_scaled(CrateGrads& other, Scalar s) {
    auto mine = tensors();
    auto theirs = other.tensors();
    for (std::size_t i = 0; i < mine.size(); ++i) *mine[i] += s * *theirs[i];
  }
};

namespace detail {

/// Thin-QR orthonormalization of a Gaussian draw, columns sign-fixed.
template <typename Scalar>
Matrix<Scalar> random_orthonormal(Eigen::Index rows, Eigen::Index cols, RngStream& rng) {
  Matrix<Scalar> G(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) G(i, j) = static_cast<Scalar>(rng.normal());
  Eigen::HouseholderQR<Matrix<Scalar>> qr(G);
  Matrix<Scalar> Q = qr.householderQ() * Matrix<Scalar>::Identity(rows, cols);
  Matrix<Scalar> R = qr.matrixQR().template triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < cols; ++j)
    if (R(j, j) < Scalar(0)) Q.col(j) = -Q.col(j);
  return Q;
}

template <typename Scalar>
Matrix<Scalar> fan_in_uniform(Eigen::Index rows, Eigen::Index cols, Eigen::Index fan_in,
                              RngStream& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  Matrix<Scalar> W(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i)
      W(i, j) = static_cast<Scalar>(rng.uniform(-bound, bound));
  return W;
}

}  // namespace detail

/// Orthonormal subspace bases and dictionaries, fan-in-scaled uniform FC maps.
template <typename Scalar>
CrateParams<Scalar> init_params(const CrateConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  CrateParams<Scalar> p;
  p.cfg = cfg;
  const int h = cfg.hidden;
  const int w = cfg.hidden / cfg.heads;

  RngStream fc = RngStream::derive(seed, "init-fc");
  p.input_weight = detail::fan_in_uniform<Scalar>(h, cfg.token_in_dim(), cfg.token_in_dim(), fc);
  p.input_bias = detail::fan_in_uniform<Scalar>(h, 1, cfg.token_in_dim(), fc);
  p.output_weight = detail::fan_in_uniform<Scalar>(cfg.token_out_dim(), h, h, fc);
  p.output_bias = detail::fan_in_uniform<Scalar>(cfg.token_out_dim(), 1, h, fc);

  auto make_blocks = [&](const std::string& tag, int count) {
    std::vector<BlockParams<Scalar>> blocks;
    for (int b = 0; b < count; ++b) {
      RngStream rng = RngStream::derive(seed, tag, static_cast<std::uint64_t>(b));
      BlockParams<Scalar> blk;
      for (int head = 0; head < cfg.heads; ++head)
        blk.bases.push_back(detail::random_orthonormal<Scalar>(h, w, rng));
      blk.dict = detail::random_orthonormal<Scalar>(h, h, rng);
      blk.kappa = static_cast<Scalar>(cfg.kappa);
      blk.eta = static_cast<Scalar>(cfg.eta);
      blk.lambda = static_cast<Scalar>(cfg.lambda);
      blk.epsilon = static_cast<Scalar>(cfg.epsilon);
      blk.ista_variant = cfg.ista_variant;
      blocks.push_back(std::move(blk));
    }
    return blocks;
  };
  p.encoder = make_blocks("init-encoder", cfg.encoder_blocks);
  p.decoder = make_blocks("init-decoder", cfg.decoder_blocks);
  return p;
}

/// Raw network output: row 0 is the occupancy logit, row 1 the normalized
/// speed estimate, one column per road cell (lane-major).
template <typename Scalar>
using RawOutput = Matrix<Scalar>;

template <typename Scalar>
struct ForwardCache {
  Vector<Scalar> input;
  Matrix<Scalar> tokens_in;  // Z^0
  std::vector<BlockCache<Scalar>> blocks;        // encoder then decoder
  std::vector<Matrix<Scalar>> block_outputs;     // Z^1 ... Z^{E+D}
  Matrix<Scalar> tokens_out;                     // alias of last block output
  RawOutput<Scalar> raw;

  /// Encoder-layer feature maps in depth order (for coding-rate profiles).
  std::vector<const Matrix<Scalar>*> encoder_features(int encoder_blocks) const {
    std::vector<const Matrix<Scalar>*> out;
    for (int i = 0; i < encoder_blocks; ++i) out.push_back(&block_outputs[i]);
    return out;
  }
};

template <typename Scalar>
RawOutput<Scalar> forward(const Vector<Scalar>& window_flat, CrateParams<Scalar>& params,
                          ForwardCache<Scalar>* cache = nullptr) {
  const CrateConfig& cfg = params.cfg;
  cfg.validate();
  require(window_flat.size() == cfg.input_dim(), "forward: window size mismatch");
  const int N = cfg.tokens();
  const int din = cfg.token_in_dim();

  Matrix<Scalar> Z(cfg.hidden, N);
  for (int n = 0; n < N; ++n)
    Z.col(n) = params.input_weight * window_flat.segment(n * din, din) + params.input_bias;

  if (cache) {
    cache->input = window_flat;
    cache->tokens_in = Z;
    cache->blocks.assign(params.encoder.size() + params.decoder.size(), {});
    cache->block_outputs.clear();
  }

  std::size_t bi = 0;
  for (auto* stage : {&params.encoder, &params.decoder}) {
    for (auto& blk : *stage) {
      Z = crate_block<Scalar>(Z, blk, cache ? &cache->blocks[bi] : nullptr);
      if (cache) cache->block_outputs.push_back(Z);
      ++bi;
    }
  }

  RawOutput<Scalar> raw(2, cfg.total_cells());
  for (int n = 0; n < N; ++n) {
    Vector<Scalar> seg = params.output_weight * Z.col(n) + params.output_bias;
    for (int j = 0; j < cfg.patch; ++j) {
      raw(0, n * cfg.patch + j) = seg[2 * j];
      raw(1, n * cfg.patch + j) = seg[2 * j + 1];
    }
  }
  if (cache) {
    cache->tokens_out = Z;
    cache->raw = raw;
  }
  return raw;
}

/// Exact reverse-mode gradients of every learnable tensor given dL/d(raw).
template <typename Scalar>
void backward(const RawOutput<Scalar>& dRaw, CrateParams<Scalar>& params,
              const ForwardCache<Scalar>& cache, CrateGrads<Scalar>& grads) {
  const CrateConfig& cfg = params.cfg;
  require(cache.block_outputs.size() == params.encoder.size() + params.decoder.size(),
          "backward: forward cache missing");
  const int N = cfg.tokens();

  // output FC
  Matrix<Scalar> dZ(cfg.hidden, N);
  Vector<Scalar> seg(cfg.token_out_dim());
  for (int n = 0; n < N; ++n) {
    for (int j = 0; j < cfg.patch; ++j) {
      seg[2 * j] = dRaw(0, n * cfg.patch + j);
      seg[2 * j + 1] = dRaw(1, n * cfg.patch + j);
    }
    grads.output_weight.noalias() += seg * cache.tokens_out.col(n).transpose();
    grads.output_bias += seg;
    dZ.col(n) = params.output_weight.transpose() * seg;
  }

  // blocks, deepest first
  const std::size_t e = params.encoder.size();
  const std::size_t total = e + params.decoder.size();
  for (std::size_t bi = total; bi-- > 0;) {
    BlockParams<Scalar>& blk = bi < e ? params.encoder[bi] : params.decoder[bi - e];
    BlockGrads<Scalar>& bg = bi < e ? grads.encoder[bi] : grads.decoder[bi - e];
    dZ = crate_block_backward<Scalar>(dZ, blk, cache.blocks[bi], bg);
  }

  // input FC
  const int din = cfg.token_in_dim();
  for (int n = 0; n < N; ++n) {
    grads.input_weight.noalias() +=
        dZ.col(n) * cache.input.segment(n * din, din).transpose();
    grads.input_bias += dZ.col(n);
  }
}

template <typename Scalar>
Scalar sigmoid(Scalar x) {
  return Scalar(1) / (Scalar(1) + std::exp(-x));
}

/// Occupancy probabilities from the raw logits.
template <typename Scalar>
Vector<Scalar> occupancy_probability(const RawOutput<Scalar>& raw) {
  Vector<Scalar> p(raw.cols());
  for (Eigen::Index i = 0; i < raw.cols(); ++i) p[i] = sigmoid(raw(0, i));
  return p;
}

/// Thresholded sigmoid + greedy non-maximum suppression with radius d_e:
/// candidates are scanned by descending probability and each accepted cell
/// suppresses the d_e cells on both sides in its lane. Accepted cells carry
/// the speed clamped to [0, 1]; the result satisfies the frame invariants.
template <typename Scalar>
rco::RCOFrame postprocess(const RawOutput<Scalar>& raw, const CrateConfig& cfg,
                          const rco::GridConfig& grid) {
  require(raw.rows() == 2 && raw.cols() == cfg.total_cells(), "postprocess: bad raw shape");
  if (!raw.allFinite()) throw NumericError("postprocess: non-finite network output");
  rco::RCOFrame frame = rco::RCOFrame::empty(grid);

  struct Candidate {
    double p;
    int lane;
    int cell;
  };
  std::vector<Candidate> cands;
  for (int l = 0; l < cfg.lanes; ++l)
    for (int c = 0; c < cfg.cells; ++c) {
      const double p = sigmoid(static_cast<double>(raw(0, l * cfg.cells + c)));
      if (p > 0.5) cands.push_back({p, l, c});
    }
  std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
    if (a.p != b.p) return a.p > b.p;
    if (a.lane != b.lane) return a.lane < b.lane;
    return a.cell < b.cell;
  });

  std::vector<char> suppressed(static_cast<std::size_t>(cfg.lanes) * cfg.cells, 0);
  for (const auto& cand : cands) {
    const std::size_t idx = static_cast<std::size_t>(cand.lane) * cfg.cells + cand.cell;
    if (suppressed[idx]) continue;
    frame.occ(cand.lane, cand.cell) = 1.0f;
    const auto spd = static_cast<float>(
        std::clamp(static_cast<double>(raw(1, cand.lane * cfg.cells + cand.cell)), 0.0, 1.0));
    frame.spd(cand.lane, cand.cell) = spd;
    for (int d = 1; d <= cfg.d_e; ++d) {
      if (cand.cell - d >= 0)
        suppressed[static_cast<std::size_t>(cand.lane) * cfg.cells + cand.cell - d] = 1;
      if (cand.cell + d < cfg.cells)
        suppressed[static_cast<std::size_t>(cand.lane) * cfg.cells + cand.cell + d] = 1;
    }
  }
  return frame;
}

}  // namespace cvls::crate
