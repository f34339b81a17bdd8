#pragma once

#include <cmath>

#include "cvls/common.hpp"

namespace cvls::sim {

enum class Phase { kGreen, kAmber, kRed };

/// Fixed-time signal: each cycle runs red, then green, then amber.
/// phase_at is periodic with period `cycle`.
struct SignalPlan {
  double cycle = 60.0;
  double amber = 3.0;
  double red = 30.0;
  double stop_line_position = 0.0;  // meters from upstream end; 0 = set from link

  void validate() const {
    require(cycle > 0.0 && amber >= 0.0 && red >= 0.0, "signal durations must be non-negative");
    require(red + amber < cycle, "red + amber must be shorter than the cycle");
  }

  double green() const { return cycle - red - amber; }

  Phase phase_at(double t) const {
    double u = std::fmod(t, cycle);
    if (u < 0.0) u += cycle;
    if (u < red) return Phase::kRed;
    if (u < cycle - amber) return Phase::kGreen;
    return Phase::kAmber;
  }

  /// Vehicles treat amber like red and brake for the stop line.
  bool demands_stop(double t) const { return phase_at(t) != Phase::kGreen; }
};

}  // namespace cvls::sim
