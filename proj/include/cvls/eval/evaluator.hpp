#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cvls/crate/network.hpp"
#include "cvls/eval/baseline.hpp"
#include "cvls/eval/matching.hpp"
#include "cvls/rco/tensor_io.hpp"

namespace cvls::eval {

struct ScenarioMetrics {
  int scenario = 0;
  Counts counts;
  Prf1 prf;
  std::optional<double> rmse;
};

struct MethodReport {
  std::string name;
  Counts counts;
  Prf1 prf;
  std::optional<double> rmse;
  std::vector<ScenarioMetrics> per_scenario;
};

/// One evaluated instant, kept for match dumps and recomputation.
struct SampleMatches {
  Eigen::Index sample = 0;
  int scenario = 0;
  MatchResult match;
};

/// CVs are inputs, not estimates: both the estimate and truth lists drop any
/// vehicle whose cell is occupied in the CV input frame, and the CV positions
/// delimit the matching segments.
inline MatchResult match_against_truth(const rco::RCOFrame& estimate,
                                       const rco::RCOFrame& target,
                                       const rco::RCOFrame& cv_input,
                                       const rco::GridConfig& grid, double threshold) {
  auto cell_of = [&](const sim::VehicleState& v) {
    return static_cast<int>(std::floor(v.position / grid.cell_length));
  };
  std::vector<char> is_cv_cell(static_cast<std::size_t>(grid.cells()), 0);
  std::vector<double> cv_positions;
  for (const auto& v : rco::decode(cv_input, grid)) {
    is_cv_cell[static_cast<std::size_t>(cell_of(v))] = 1;
    cv_positions.push_back(v.position);
  }
  std::vector<sim::VehicleState> estimates, truths;
  for (const auto& v : rco::decode(estimate, grid))
    if (!is_cv_cell[static_cast<std::size_t>(cell_of(v))]) estimates.push_back(v);
  for (const auto& v : rco::decode(target, grid))
    if (!is_cv_cell[static_cast<std::size_t>(cell_of(v))]) truths.push_back(v);
  return segment_and_match(std::move(estimates), std::move(truths), std::move(cv_positions),
                           threshold);
}

namespace detail {

template <typename FramePerSample>
MethodReport evaluate_method(const std::string& name, const rco::Dataset& data,
                             double threshold, FramePerSample&& estimate_frame,
                             std::vector<SampleMatches>* dump) {
  MethodReport rep;
  rep.name = name;
  std::vector<Counts> by_scenario(data.scenarios.size());
  std::vector<std::vector<MatchResult::Pair>> pairs_by_scenario(data.scenarios.size());
  std::vector<MatchResult::Pair> all_pairs;

  for (Eigen::Index s = 0; s < data.size(); ++s) {
    const rco::RCOFrame input = data.input_frame(s);
    const rco::RCOFrame target = data.target_frame(s);
    const rco::RCOFrame est = estimate_frame(s, input);
    MatchResult m = match_against_truth(est, target, input, data.grid, threshold);
    const int scen = data.sample_scenario[static_cast<std::size_t>(s)];
    by_scenario[static_cast<std::size_t>(scen)] += m;
    rep.counts += m;
    for (const auto& p : m.pairs) {
      pairs_by_scenario[static_cast<std::size_t>(scen)].push_back(p);
      all_pairs.push_back(p);
    }
    if (dump) dump->push_back({s, scen, std::move(m)});
  }

  rep.prf = prf1(rep.counts);
  rep.rmse = speed_rmse(all_pairs);
  for (std::size_t i = 0; i < data.scenarios.size(); ++i) {
    ScenarioMetrics sm;
    sm.scenario = static_cast<int>(i);
    sm.counts = by_scenario[i];
    sm.prf = prf1(sm.counts);
    sm.rmse = speed_rmse(pairs_by_scenario[i]);
    rep.per_scenario.push_back(sm);
  }
  return rep;
}

}  // namespace detail

/// Forward + postprocess + decode on every sample of the dataset.
inline MethodReport evaluate_model(crate::CrateParams<float>& params,
                                   const rco::Dataset& data, double threshold,
                                   std::vector<SampleMatches>* dump = nullptr) {
  require(data.windows.rows() == params.cfg.input_dim(),
          "evaluate_model: dataset does not match architecture");
  return detail::evaluate_method(
      "cvvlsnet", data, threshold,
      [&](Eigen::Index s, const rco::RCOFrame&) {
        const VectorF x = data.windows.col(s);
        const crate::RawOutput<float> raw = crate::forward<float>(x, params);
        return crate::postprocess<float>(raw, params.cfg, data.grid);
      },
      dump);
}

inline MethodReport evaluate_baseline(const rco::Dataset& data, double threshold,
                                      const BaselineParams& bp = {},
                                      std::vector<SampleMatches>* dump = nullptr) {
  return detail::evaluate_method(
      "interpolation_baseline", data, threshold,
      [&](Eigen::Index s, const rco::RCOFrame& input) {
        rco::RCOWindow w;
        w.frames.push_back(input);
        return baseline_interpolate(w, data.grid, bp);
      },
      dump);
}

}  // namespace cvls::eval
