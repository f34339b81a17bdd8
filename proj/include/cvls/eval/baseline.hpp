#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "cvls/rco/grid.hpp"

namespace cvls::eval {

/// Car-following constants the interpolation baseline assumes.
struct BaselineParams {
  double min_gap = 2.5;
  double desired_headway = 1.0;
  double vehicle_length = 5.0;
  double idm_exponent = 4.0;
};

/// Front-to-front spacing at which the car-following law is in equilibrium at
/// speed v; infinite at or above free flow.
inline double equilibrium_spacing(double v, double v0, const BaselineParams& p) {
  if (v < 0.0) v = 0.0;
  const double ratio = std::pow(v / v0, p.idm_exponent);
  if (ratio >= 1.0) return std::numeric_limits<double>::infinity();
  return (p.min_gap + v * p.desired_headway) / std::sqrt(1.0 - ratio) + p.vehicle_length;
}

/// Detector-free comparator: between each pair of consecutive CVs, inserts
/// round(gap / equilibrium spacing) - 1 vehicles at uniform offsets with
/// linearly interpolated speeds. Produces a frame holding the CVs plus the
/// insertions; segments beyond the first and last CV receive no estimates.
inline rco::RCOFrame baseline_interpolate(const rco::RCOWindow& window,
                                          const rco::GridConfig& grid,
                                          const BaselineParams& p = {}) {
  std::vector<sim::VehicleState> cvs = rco::decode(window.newest(), grid);
  std::sort(cvs.begin(), cvs.end(),
            [](const sim::VehicleState& a, const sim::VehicleState& b) {
              return a.position < b.position;
            });

  std::vector<sim::VehicleState> out = cvs;
  for (std::size_t i = 0; i + 1 < cvs.size(); ++i) {
    const auto& a = cvs[i];
    const auto& b = cvs[i + 1];
    const double gap = b.position - a.position;
    const double v_mid = 0.5 * (a.speed + b.speed);
    const double spacing = equilibrium_spacing(v_mid, grid.free_flow_speed, p);
    if (!std::isfinite(spacing)) continue;
    const long n = std::lround(gap / spacing) - 1;
    for (long j = 1; j <= n; ++j) {
      sim::VehicleState v;
      const double f = static_cast<double>(j) / static_cast<double>(n + 1);
      v.position = a.position + f * gap;
      v.speed = a.speed + f * (b.speed - a.speed);
      out.push_back(v);
    }
  }

  // encode by hand so an insertion landing on an occupied cell is dropped
  // rather than rejected
  rco::RCOFrame frame = rco::RCOFrame::empty(grid, window.newest().timestamp);
  const int cells = grid.cells();
  for (const auto& v : out) {
    int c = static_cast<int>(std::floor(v.position / grid.cell_length));
    c = std::clamp(c, 0, cells - 1);
    if (frame.occ(0, c) > 0.0f) continue;
    frame.occ(0, c) = 1.0f;
    frame.spd(0, c) = static_cast<float>(
        std::clamp(v.speed / grid.free_flow_speed, 0.0, 1.0));
  }
  return frame;
}

}  // namespace cvls::eval
