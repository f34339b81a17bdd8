#pragma once

#include <algorithm>
#include <numeric>
#include <vector>

#include "cvls/crate/coding_rate.hpp"
#include "cvls/crate/network.hpp"
#include "cvls/rco/tensor_io.hpp"

namespace cvls::eval {

/// Mean coding rate of each encoder layer's output over a sample set, in
/// depth order (layer 1 first).
inline std::vector<double> coding_rate_profile(crate::CrateParams<float>& params,
                                               const rco::Dataset& data) {
  require(data.size() > 0, "coding_rate_profile: empty sample set");
  const int layers = params.cfg.encoder_blocks;
  std::vector<double> mean(layers, 0.0);
  for (Eigen::Index s = 0; s < data.size(); ++s) {
    crate::ForwardCache<float> cache;
    const VectorF x = data.windows.col(s);
    crate::forward<float>(x, params, &cache);
    for (int l = 0; l < layers; ++l) {
      const MatrixD Z = cache.block_outputs[l].cast<double>();
      mean[l] += crate::coding_rate<double>(
          Z, static_cast<double>(params.encoder[l].epsilon));
    }
  }
  for (auto& v : mean) v /= static_cast<double>(data.size());
  return mean;
}

/// Spearman rank correlation between 1..n and the values (average ranks on
/// ties, Pearson on the ranks).
inline double spearman_against_depth(const std::vector<double>& values) {
  const std::size_t n = values.size();
  require(n >= 2, "spearman needs at least two points");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t(0));
  std::sort(idx.begin(), idx.end(),
            [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> rank(n, 0.0);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && values[idx[j + 1]] == values[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) rank[idx[t]] = avg;
    i = j + 1;
  }
  const double mean_depth = 0.5 * static_cast<double>(n + 1);
  double num = 0.0, den_a = 0.0, den_b = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double da = static_cast<double>(i + 1) - mean_depth;
    const double db = rank[i] - mean_depth;  // ranks share the same mean
    num += da * db;
    den_a += da * da;
    den_b += db * db;
  }
  if (den_a == 0.0 || den_b == 0.0) return 0.0;
  return num / std::sqrt(den_a * den_b);
}

}  // namespace cvls::eval
