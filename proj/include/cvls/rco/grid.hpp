#pragma once

#include <cmath>
#include <vector>

#include "cvls/common.hpp"
#include "cvls/sim/simulator.hpp"

namespace cvls::rco {

struct GridConfig {
  int lanes = 1;
  double cell_length = 1.0;
  double link_length = 200.0;
  double free_flow_speed = 50.0 / 3.6;

  int cells() const { return static_cast<int>(std::llround(link_length / cell_length)); }

  static GridConfig from_sim(const sim::SimConfig& s, double cell_length = 1.0) {
    GridConfig g;
    g.cell_length = cell_length;
    g.link_length = s.link_length;
    g.free_flow_speed = s.free_flow_speed;
    return g;
  }
};

enum class EncodeSet { kCvOnly, kAll };

/// Fixed-size per-lane cell grid. occ is 0/1; spd is the speed normalized by
/// free-flow speed on occupied cells and -1 on empty ones.
struct RCOFrame {
  Array2D<float> occ;  // [lanes x cells]
  Array2D<float> spd;  // [lanes x cells]
  double cell_length = 1.0;
  double timestamp = 0.0;

  int lanes() const { return static_cast<int>(occ.rows()); }
  int cells() const { return static_cast<int>(occ.cols()); }

  static RCOFrame empty(const GridConfig& g, double timestamp = 0.0) {
    RCOFrame f;
    f.occ = Array2D<float>::Zero(g.lanes, g.cells());
    f.spd = Array2D<float>::Constant(g.lanes, g.cells(), -1.0f);
    f.cell_length = g.cell_length;
    f.timestamp = timestamp;
    return f;
  }

  int occupied_count() const { return static_cast<int>((occ > 0.5f).count()); }
};

/// k frames, newest first, one second apart; flattens to the network input
/// layout [lane][cell][channel] with channels (occ(t), spd(t), occ(t-1), ...).
struct RCOWindow {
  std::vector<RCOFrame> frames;

  int k() const { return static_cast<int>(frames.size()); }
  const RCOFrame& newest() const { return frames.front(); }

  VectorF flatten() const {
    require(!frames.empty(), "window must hold at least one frame");
    const int lanes = frames[0].lanes();
    const int cells = frames[0].cells();
    const int kk = k();
    VectorF x(static_cast<Eigen::Index>(lanes) * cells * 2 * kk);
    Eigen::Index i = 0;
    for (int l = 0; l < lanes; ++l)
      for (int c = 0; c < cells; ++c)
        for (int s = 0; s < kk; ++s) {
          x[i++] = frames[s].occ(l, c);
          x[i++] = frames[s].spd(l, c);
        }
    return x;
  }
};

/// Marks each vehicle's front bumper cell: occ = 1, spd = speed / v0.
/// `which` selects the CV subset (network input) or every vehicle (target).
inline RCOFrame encode(const std::vector<sim::VehicleState>& vehicles, EncodeSet which,
                       const GridConfig& g, double timestamp = 0.0) {
  RCOFrame f = RCOFrame::empty(g, timestamp);
  const int cells = g.cells();
  for (const auto& v : vehicles) {
    if (which == EncodeSet::kCvOnly && !v.is_cv) continue;
    require(v.position >= 0.0 && v.position <= g.link_length,
            "vehicle position outside link");
    int c = static_cast<int>(std::floor(v.position / g.cell_length));
    if (c >= cells) c = cells - 1;
    constexpr int lane = 0;  // single-lane data model
    if (f.occ(lane, c) > 0.0f)
      throw DataError("two vehicles map to cell " + std::to_string(c));
    f.occ(lane, c) = 1.0f;
    f.spd(lane, c) = static_cast<float>(v.speed / g.free_flow_speed);
  }
  return f;
}

/// One vehicle per occupied cell, placed at the cell center.
inline std::vector<sim::VehicleState> decode(const RCOFrame& f, const GridConfig& g) {
  std::vector<sim::VehicleState> out;
  int id = 0;
  for (int l = 0; l < f.lanes(); ++l)
    for (int c = 0; c < f.cells(); ++c)
      if (f.occ(l, c) > 0.5f) {
        sim::VehicleState v;
        v.id = id++;
        v.position = (c + 0.5) * f.cell_length;
        v.speed = static_cast<double>(f.spd(l, c)) * g.free_flow_speed;
        out.push_back(v);
      }
  return out;
}

/// (k-step CV input window ending at t, all-vehicle target at t).
/// Frames are sampled one second apart from the trajectory log.
inline std::pair<RCOWindow, RCOFrame> window(const sim::TrajectoryLog& log, double t, int k,
                                             const GridConfig& g) {
  require(k >= 1, "k must be at least 1");
  if (t - (k - 1) < 0.0)
    throw ContractError("window needs history back to t-k+1");
  RCOWindow w;
  w.frames.reserve(k);
  for (int s = 0; s < k; ++s) {
    const double ts = t - s;
    w.frames.push_back(encode(log.at_time(ts).vehicles, EncodeSet::kCvOnly, g, ts));
  }
  RCOFrame target = encode(log.at_time(t).vehicles, EncodeSet::kAll, g, t);
  return {std::move(w), std::move(target)};
}

}  // namespace cvls::rco
