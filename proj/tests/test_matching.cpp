#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "cvls/eval/matching.hpp"
#include "cvls/rng.hpp"

using namespace cvls;
using eval::Counts;
using eval::MatchResult;
using sim::VehicleState;

namespace {

std::vector<VehicleState> fleet_at(const std::vector<double>& positions) {
  std::vector<VehicleState> out;
  int id = 0;
  for (double p : positions) {
    VehicleState v;
    v.id = id++;
    v.position = p;
    out.push_back(v);
  }
  return out;
}

/// Exhaustive maximum-cardinality matching between estimates and truths with
/// edges wherever the distance is within the threshold.
int max_matching_exhaustive(const std::vector<double>& est, const std::vector<double>& tru,
                            double threshold) {
  const int n = static_cast<int>(tru.size());
  // recursion over estimates with a bitmask of used truths
  std::vector<std::vector<int>> memo;
  std::vector<std::vector<char>> seen;
  const int m = static_cast<int>(est.size());
  memo.assign(m + 1, std::vector<int>(1 << n, 0));
  seen.assign(m + 1, std::vector<char>(1 << n, 0));
  auto rec = [&](auto&& self, int i, unsigned mask) -> int {
    if (i == m) return 0;
    if (seen[i][mask]) return memo[i][mask];
    int best = self(self, i + 1, mask);  // leave estimate i unmatched
    for (int j = 0; j < n; ++j) {
      if (mask & (1u << j)) continue;
      if (std::abs(est[i] - tru[j]) <= threshold)
        best = std::max(best, 1 + self(self, i + 1, mask | (1u << j)));
    }
    seen[i][mask] = 1;
    memo[i][mask] = best;
    return best;
  };
  return rec(rec, 0, 0u);
}

}  // namespace

TEST_CASE("exact estimates give all TP and nothing else") {
  const std::vector<double> pos{12.0, 40.0, 77.5, 130.0};
  const auto m =
      eval::segment_and_match(fleet_at(pos), fleet_at(pos), {25.0, 100.0}, 5.0);
  CHECK(m.tp() == 4);
  CHECK(m.fp() == 0);
  CHECK(m.fn() == 0);
  for (const auto& p : m.pairs) CHECK(p.distance == 0.0);
}

TEST_CASE("no estimates leaves every truth a FN") {
  const auto m = eval::segment_and_match({}, fleet_at({10.0, 20.0, 30.0}), {15.0}, 5.0);
  CHECK(m.tp() == 0);
  CHECK(m.fp() == 0);
  CHECK(m.fn() == 3);
}

TEST_CASE("segments separate matches: a far truth in another segment stays FN") {
  // estimate at 10 in segment [0,50); truth at 12 same segment, truth at 60 beyond
  const auto m = eval::segment_and_match(fleet_at({10.0}), fleet_at({12.0, 60.0}), {50.0}, 5.0);
  CHECK(m.tp() == 1);
  CHECK(m.fp() == 0);
  CHECK(m.fn() == 1);

  // same positions but no segment boundary: still only one match possible
  const auto m2 = eval::segment_and_match(fleet_at({10.0}), fleet_at({12.0, 60.0}), {}, 5.0);
  CHECK(m2.tp() == 1);
  CHECK(m2.fn() == 1);
}

TEST_CASE("greedy matching equals exhaustive optimal matching on random segments") {
  RngStream rng(55);
  for (int trial = 0; trial < 10000; ++trial) {
    const int ne = static_cast<int>(rng.below(7));
    const int nt = static_cast<int>(rng.below(7));
    std::vector<double> est, tru;
    for (int i = 0; i < ne; ++i) est.push_back(rng.uniform(0.0, 60.0));
    for (int i = 0; i < nt; ++i) tru.push_back(rng.uniform(0.0, 60.0));
    const double threshold = rng.uniform(0.5, 10.0);

    const auto m = eval::segment_and_match(fleet_at(est), fleet_at(tru), {}, threshold);
    const int optimal = max_matching_exhaustive(est, tru, threshold);
    CHECK(m.tp() == optimal);
    // count conservation
    CHECK(m.tp() + m.fp() == ne);
    CHECK(m.tp() + m.fn() == nt);
  }
}

TEST_CASE("raising the threshold never decreases TP") {
  RngStream rng(56);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> est, tru;
    const int ne = 1 + static_cast<int>(rng.below(6));
    const int nt = 1 + static_cast<int>(rng.below(6));
    for (int i = 0; i < ne; ++i) est.push_back(rng.uniform(0.0, 50.0));
    for (int i = 0; i < nt; ++i) tru.push_back(rng.uniform(0.0, 50.0));
    int prev = -1;
    for (double thr : {1.0, 3.0, 7.0, 20.0}) {
      const auto m = eval::segment_and_match(fleet_at(est), fleet_at(tru), {}, thr);
      CHECK(m.tp() >= prev);
      prev = m.tp();
    }
  }
}

TEST_CASE("prf1: direct formula, degenerate zeros, Table-consistent spot value") {
  Counts c;
  c.tp = 1;
  c.fp = 0;
  c.fn = 1;
  const auto r = eval::prf1(c);
  CHECK(r.precision == doctest::Approx(1.0));
  CHECK(r.recall == doctest::Approx(0.5));
  CHECK(r.f1 == doctest::Approx(2.0 / 3.0).epsilon(1e-9));
  CHECK_FALSE(r.degenerate);

  Counts zero;
  const auto rz = eval::prf1(zero);
  CHECK(rz.precision == 0.0);
  CHECK(rz.recall == 0.0);
  CHECK(rz.f1 == 0.0);
  CHECK(rz.degenerate);

  // precision 95.3 %, recall 79.8 % must give F1 86.9 % within 0.1
  Counts t;
  t.tp = 953 * 798;
  t.fp = 47 * 798;   // precision = 0.953
  t.fn = 202 * 953;  // recall = 0.798
  const auto rt = eval::prf1(t);
  CHECK(rt.precision == doctest::Approx(0.953).epsilon(1e-9));
  CHECK(rt.recall == doctest::Approx(0.798).epsilon(1e-9));
  CHECK(std::abs(rt.f1 * 100.0 - 86.9) < 0.1);
}

TEST_CASE("speed rmse: zeros, single pair, scalar-loop oracle") {
  std::vector<MatchResult::Pair> pairs(3);
  for (auto& p : pairs) {
    p.estimate.speed = 7.0;
    p.truth.speed = 7.0;
  }
  CHECK(*eval::speed_rmse(pairs) == doctest::Approx(0.0));

  pairs.resize(1);
  pairs[0].estimate.speed = 9.0;
  pairs[0].truth.speed = 7.0;
  CHECK(*eval::speed_rmse(pairs) == doctest::Approx(2.0));

  CHECK_FALSE(eval::speed_rmse({}).has_value());

  RngStream rng(57);
  std::vector<MatchResult::Pair> rnd(20);
  double sum = 0.0;
  for (auto& p : rnd) {
    p.estimate.speed = rng.uniform(0.0, 14.0);
    p.truth.speed = rng.uniform(0.0, 14.0);
    sum += (p.estimate.speed - p.truth.speed) * (p.estimate.speed - p.truth.speed);
  }
  CHECK(*eval::speed_rmse(rnd) == doctest::Approx(std::sqrt(sum / 20.0)).epsilon(1e-12));
}

TEST_CASE("perfect-input fixpoint: truth against itself is perfect") {
  RngStream rng(58);
  std::vector<double> pos;
  double x = 5.0;
  while (x < 190.0) {
    pos.push_back(x);
    x += rng.uniform(8.0, 20.0);
  }
  auto fleet = fleet_at(pos);
  for (auto& v : fleet) v.speed = rng.uniform(0.0, 13.0);
  const auto m = eval::segment_and_match(fleet, fleet, {50.0, 120.0}, 5.0);
  CHECK(m.fp() == 0);
  CHECK(m.fn() == 0);
  const auto r = eval::prf1({m.tp(), m.fp(), m.fn()});
  CHECK(r.precision == 1.0);
  CHECK(r.recall == 1.0);
  CHECK(r.f1 == 1.0);
  CHECK(*eval::speed_rmse(m.pairs) == 0.0);
}
