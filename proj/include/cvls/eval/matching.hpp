#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "cvls/common.hpp"
#include "cvls/sim/idm.hpp"

namespace cvls::eval {

/// Matched (estimate, truth) pairs plus the leftovers, all inside
/// CV-delimited segments.
struct MatchResult {
  struct Pair {
    sim::VehicleState estimate;
    sim::VehicleState truth;
    double distance = 0.0;
  };
  std::vector<Pair> pairs;
  std::vector<sim::VehicleState> unmatched_estimates;
  std::vector<sim::VehicleState> unmatched_truths;
  double threshold = 5.0;

  int tp() const { return static_cast<int>(pairs.size()); }
  int fp() const { return static_cast<int>(unmatched_estimates.size()); }
  int fn() const { return static_cast<int>(unmatched_truths.size()); }
};

struct Counts {
  long tp = 0;
  long fp = 0;
  long fn = 0;

  void operator+=(const MatchResult& m) {
    tp += m.tp();
    fp += m.fp();
    fn += m.fn();
  }
};

namespace detail {

/// Greedy order-preserving matching of two position-sorted lists: walk both,
/// pair when within threshold, otherwise drop whichever point is further
/// behind. On sorted data this attains the maximum-cardinality matching.
template <typename Sink>
void match_segment(const std::vector<sim::VehicleState>& est,
                   const std::vector<sim::VehicleState>& tru, double threshold,
                   Sink&& emit_pair, std::vector<sim::VehicleState>& leftover_est,
                   std::vector<sim::VehicleState>& leftover_tru) {
  std::size_t i = 0, j = 0;
  while (i < est.size() && j < tru.size()) {
    const double d = std::abs(est[i].position - tru[j].position);
    if (d <= threshold) {
      emit_pair(est[i], tru[j], d);
      ++i;
      ++j;
    } else if (est[i].position < tru[j].position) {
      leftover_est.push_back(est[i++]);
    } else {
      leftover_tru.push_back(tru[j++]);
    }
  }
  for (; i < est.size(); ++i) leftover_est.push_back(est[i]);
  for (; j < tru.size(); ++j) leftover_tru.push_back(tru[j]);
}

}  // namespace detail

/// Partitions the lane at the CV positions and matches estimated against true
/// NC vehicles inside each segment. Both inputs must already exclude the CVs
/// themselves; cv_positions only delimit the segments. A pair within the
/// threshold is a TP; leftover estimates are FPs, leftover truths FNs.
inline MatchResult segment_and_match(std::vector<sim::VehicleState> estimates,
                                     std::vector<sim::VehicleState> truths,
                                     std::vector<double> cv_positions, double threshold) {
  MatchResult res;
  res.threshold = threshold;
  auto by_pos = [](const sim::VehicleState& a, const sim::VehicleState& b) {
    return a.position < b.position;
  };
  std::sort(estimates.begin(), estimates.end(), by_pos);
  std::sort(truths.begin(), truths.end(), by_pos);
  std::sort(cv_positions.begin(), cv_positions.end());

  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> bounds{-inf};
  bounds.insert(bounds.end(), cv_positions.begin(), cv_positions.end());
  bounds.push_back(inf);

  std::size_t ei = 0, ti = 0;
  for (std::size_t b = 0; b + 1 < bounds.size(); ++b) {
    std::vector<sim::VehicleState> seg_est, seg_tru;
    while (ei < estimates.size() && estimates[ei].position < bounds[b + 1])
      seg_est.push_back(estimates[ei++]);
    while (ti < truths.size() && truths[ti].position < bounds[b + 1])
      seg_tru.push_back(truths[ti++]);
    detail::match_segment(
        seg_est, seg_tru, threshold,
        [&res](const sim::VehicleState& e, const sim::VehicleState& t, double d) {
          res.pairs.push_back({e, t, d});
        },
        res.unmatched_estimates, res.unmatched_truths);
  }
  return res;
}

struct Prf1 {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool degenerate = false;  // set when any denominator was zero
};

inline Prf1 prf1(const Counts& c) {
  require(c.tp >= 0 && c.fp >= 0 && c.fn >= 0, "prf1: negative counts");
  Prf1 r;
  if (c.tp + c.fp > 0)
    r.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  else
    r.degenerate = true;
  if (c.tp + c.fn > 0)
    r.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  else
    r.degenerate = true;
  if (r.precision + r.recall > 0.0)
    r.f1 = 2.0 * r.precision * r.recall / (r.precision + r.recall);
  else
    r.degenerate = true;
  return r;
}

/// RMSE over the true-positive pairs' speeds; nullopt when there are none.
inline std::optional<double> speed_rmse(const std::vector<MatchResult::Pair>& pairs) {
  if (pairs.empty()) return std::nullopt;
  double sum = 0.0;
  for (const auto& p : pairs) {
    const double d = p.estimate.speed - p.truth.speed;
    sum += d * d;
  }
  return std::sqrt(sum / static_cast<double>(pairs.size()));
}

}  // namespace cvls::eval
