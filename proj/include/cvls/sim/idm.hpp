#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "cvls/common.hpp"
#include "cvls/sim/signal.hpp"

namespace cvls::sim {

/// One vehicle. `position` is the front bumper, meters from the upstream end.
struct VehicleState {
  int id = 0;
  double position = 0.0;
  double speed = 0.0;
  bool is_cv = false;
  double length = 5.0;

  double rear() const { return position - length; }
};

struct SimConfig {
  double link_length = 200.0;
  double free_flow_speed = 50.0 / 3.6;
  double vehicle_length = 5.0;
  double min_gap = 2.5;
  double desired_headway = 1.0;
  double resolution = 0.1;
  double vc_ratio = 0.6;
  double penetration_rate = 0.4;
  SignalPlan signal;
  std::uint64_t seed = 1;
  double idm_accel = 1.0;
  double idm_decel = 1.5;
  double idm_exponent = 4.0;

  void validate() const {
    require(resolution > 0.0, "resolution must be positive");
    require(penetration_rate >= 0.0 && penetration_rate <= 1.0,
            "penetration rate must be a probability");
    require(vc_ratio > 0.0, "vc_ratio must be positive");
    require(link_length > 0.0 && free_flow_speed > 0.0 && vehicle_length > 0.0,
            "geometry must be positive");
    signal.validate();
  }

  double stop_line() const {
    return signal.stop_line_position > 0.0 ? signal.stop_line_position : link_length;
  }

  /// Saturation headway at the stop line: desired headway plus the time one
  /// effective vehicle length takes to pass at free-flow speed.
  double saturation_headway() const {
    return desired_headway + (vehicle_length + min_gap) / free_flow_speed;
  }

  double capacity() const {
    const double green_ratio = signal.green() / signal.cycle;
    return green_ratio / saturation_headway();  // veh/s
  }

  /// Demand rate implied by the configured V/C ratio.
  double arrival_rate() const { return vc_ratio * capacity(); }
};

/// IDM acceleration against an explicit gap and leader speed.
/// a = a_max [1 - (v/v0)^delta - (s*/s)^2],  s* = s0 + vT + v dv / (2 sqrt(a_max b)).
inline double idm_acceleration_for_gap(double v, double gap, double leader_speed,
                                       const SimConfig& cfg) {
  const double dv = v - leader_speed;
  const double s_star = cfg.min_gap + v * cfg.desired_headway +
                        v * dv / (2.0 * std::sqrt(cfg.idm_accel * cfg.idm_decel));
  const double free_term = std::pow(v / cfg.free_flow_speed, cfg.idm_exponent);
  return cfg.idm_accel * (1.0 - free_term - (s_star / gap) * (s_star / gap));
}

/// Car-following acceleration for `follower`. The binding constraint is the
/// minimum over the physical leader and, during red/amber, a stationary
/// zero-length virtual leader at the stop line. Clamped so the next-step
/// speed stays inside [0, v0].
inline double idm_acceleration(const VehicleState& follower,
                               const std::optional<VehicleState>& leader,
                               const SimConfig& cfg, double t) {
  const double v = follower.speed;
  double a = cfg.idm_accel * (1.0 - std::pow(v / cfg.free_flow_speed, cfg.idm_exponent));

  if (leader.has_value()) {
    const double gap = leader->rear() - follower.position;
    if (gap <= 0.0) {
      throw SimulationError("vehicle overlap: follower " + std::to_string(follower.id) +
                            " front at leader " + std::to_string(leader->id) + " rear");
    }
    a = std::min(a, idm_acceleration_for_gap(v, gap, leader->speed, cfg));
  }
  if (cfg.signal.demands_stop(t) && follower.position < cfg.stop_line()) {
    const double gap = cfg.stop_line() - follower.position;
    a = std::min(a, idm_acceleration_for_gap(v, gap, 0.0, cfg));
  }

  const double dt = cfg.resolution;
  a = std::clamp(a, -v / dt, (cfg.free_flow_speed - v) / dt);
  return a;
}

/// Largest entry speed <= v0 whose desired gap s*(v, v - leader_speed) fits
/// inside `gap`; nullopt when not even a crawl fits ("max" departure).
inline std::optional<double> max_safe_entry_speed(double gap, double leader_speed,
                                                  const SimConfig& cfg) {
  if (gap <= cfg.min_gap) return std::nullopt;
  // s0 + vT + v(v - vl)/(2c) = gap  ->  v^2/(2c) + v(T - vl/(2c)) + s0 - gap = 0
  const double c = std::sqrt(cfg.idm_accel * cfg.idm_decel);
  const double qa = 1.0 / (2.0 * c);
  const double qb = cfg.desired_headway - leader_speed / (2.0 * c);
  const double qc = cfg.min_gap - gap;
  const double disc = qb * qb - 4.0 * qa * qc;
  if (disc < 0.0) return std::nullopt;
  const double v = (-qb + std::sqrt(disc)) / (2.0 * qa);
  if (v <= 0.0) return std::nullopt;
  return std::min(v, cfg.free_flow_speed);
}

}  // namespace cvls::sim
