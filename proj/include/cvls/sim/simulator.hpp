#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "cvls/common.hpp"
#include "cvls/rng.hpp"
#include "cvls/sim/idm.hpp"

namespace cvls::sim {

struct Arrival {
  double time = 0.0;
  bool is_cv = false;
};

/// Full trajectory record, one slice per simulation step. Flat (time, state)
/// iteration is sorted by (time, id); slices keep vehicles ordered by
/// position, leader first.
struct TrajectoryLog {
  struct Slice {
    double time = 0.0;
    std::vector<VehicleState> vehicles;  // descending position
  };

  SimConfig config;
  int cycles = 0;
  int warmup_cycles = 0;
  std::vector<Slice> slices;

  double warmup_end() const { return warmup_cycles * config.signal.cycle; }

  const Slice& at_time(double t) const {
    const auto step = static_cast<std::size_t>(std::llround(t / config.resolution));
    require(step < slices.size(), "time outside trajectory log");
    return slices[step];
  }

  std::size_t vehicle_count() const {
    int max_id = -1;
    for (const auto& s : slices)
      for (const auto& v : s.vehicles) max_id = std::max(max_id, v.id);
    return static_cast<std::size_t>(max_id + 1);
  }
};

/// Poisson demand schedule over [0, horizon): exponential inter-arrival times
/// at rate vc_ratio * capacity, each arrival tagged CV with probability
/// penetration_rate. Tag draws use a separate stream so the arrival times are
/// unchanged when only the penetration rate differs.
inline std::vector<Arrival> generate_arrivals(const SimConfig& cfg, double horizon,
                                              std::uint64_t rng_seed) {
  require(horizon > 0.0, "horizon must be positive");
  cfg.validate();
  const double rate = cfg.arrival_rate();
  std::vector<Arrival> out;
  if (rate <= 0.0) return out;
  RngStream times = RngStream::derive(rng_seed, "arrival-times");
  RngStream tags = RngStream::derive(rng_seed, "cv-tags");
  double t = 0.0;
  while (true) {
    t += times.exponential(rate);
    if (t >= horizon) break;
    out.push_back({t, tags.bernoulli(cfg.penetration_rate)});
  }
  return out;
}

namespace detail {

inline void check_no_overlap(const std::vector<VehicleState>& ordered) {
  for (std::size_t i = 1; i < ordered.size(); ++i) {
    const double gap = ordered[i - 1].rear() - ordered[i].position;
    if (gap < 0.0) {
      throw SimulationError("collision between vehicles " +
                            std::to_string(ordered[i - 1].id) + " and " +
                            std::to_string(ordered[i].id) + " (gap " +
                            std::to_string(gap) + " m)");
    }
  }
}

}  // namespace detail

/// One synchronous update at time t: accelerations from the states at t, then
/// a ballistic move over one resolution step. Vehicles whose front reaches the
/// link end are removed. Input and output are ordered leader first.
inline std::vector<VehicleState> step(const std::vector<VehicleState>& state, double t,
                                      const SimConfig& cfg) {
  const double dt = cfg.resolution;
  std::vector<VehicleState> next;
  next.reserve(state.size());
  for (std::size_t i = 0; i < state.size(); ++i) {
    const std::optional<VehicleState> leader =
        i == 0 ? std::nullopt : std::optional<VehicleState>(state[i - 1]);
    const double a = idm_acceleration(state[i], leader, cfg, t);
    VehicleState v = state[i];
    const double v_new = std::clamp(v.speed + a * dt, 0.0, cfg.free_flow_speed);
    v.position += 0.5 * (v.speed + v_new) * dt;
    v.speed = v_new;
    if (v.position < cfg.link_length) next.push_back(v);
  }
  detail::check_no_overlap(next);
  return next;
}

/// Runs `cycles` signal cycles from an empty link. Arrivals blocked at the
/// entry are deferred until the gap to the last vehicle admits a positive
/// entry speed; they then enter at the largest safe speed up to free flow.
inline TrajectoryLog run_scenario(const SimConfig& cfg, int cycles) {
  require(cycles >= 1, "need at least one cycle");
  cfg.validate();
  const double horizon = cycles * cfg.signal.cycle;
  std::vector<Arrival> schedule = generate_arrivals(cfg, horizon, cfg.seed);

  TrajectoryLog log;
  log.config = cfg;
  log.cycles = cycles;
  log.warmup_cycles = cycles / 6;

  const auto steps = static_cast<std::size_t>(std::llround(horizon / cfg.resolution));
  std::vector<VehicleState> state;
  std::size_t next_arrival = 0;
  int next_id = 0;

  log.slices.reserve(steps);
  for (std::size_t s = 0; s < steps; ++s) {
    const double t = static_cast<double>(s) * cfg.resolution;

    // admit at most one deferred arrival per step
    if (next_arrival < schedule.size() && schedule[next_arrival].time <= t) {
      const double gap = state.empty() ? std::numeric_limits<double>::infinity()
                                       : state.back().rear();
      const double leader_speed = state.empty() ? cfg.free_flow_speed : state.back().speed;
      if (auto v_in = max_safe_entry_speed(gap, leader_speed, cfg)) {
        VehicleState veh;
        veh.id = next_id++;
        veh.position = 0.0;
        veh.speed = *v_in;
        veh.is_cv = schedule[next_arrival].is_cv;
        veh.length = cfg.vehicle_length;
        state.push_back(veh);
        ++next_arrival;
      }
    }

    log.slices.push_back({t, state});
    state = step(state, t, cfg);
  }
  return log;
}

}  // namespace cvls::sim
