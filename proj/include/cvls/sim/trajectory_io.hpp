#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "cvls/sim/simulator.hpp"

namespace cvls::sim {

inline nlohmann::json to_json(const SimConfig& c) {
  return nlohmann::json{
      {"link_length", c.link_length},
      {"free_flow_speed", c.free_flow_speed},
      {"vehicle_length", c.vehicle_length},
      {"min_gap", c.min_gap},
      {"desired_headway", c.desired_headway},
      {"resolution", c.resolution},
      {"vc_ratio", c.vc_ratio},
      {"penetration_rate", c.penetration_rate},
      {"seed", c.seed},
      {"idm_accel", c.idm_accel},
      {"idm_decel", c.idm_decel},
      {"idm_exponent", c.idm_exponent},
      {"signal",
       {{"cycle", c.signal.cycle},
        {"amber", c.signal.amber},
        {"red", c.signal.red},
        {"stop_line_position", c.signal.stop_line_position}}}};
}

inline SimConfig sim_config_from_json(const nlohmann::json& j) {
  SimConfig c;
  c.link_length = j.at("link_length");
  c.free_flow_speed = j.at("free_flow_speed");
  c.vehicle_length = j.at("vehicle_length");
  c.min_gap = j.at("min_gap");
  c.desired_headway = j.at("desired_headway");
  c.resolution = j.at("resolution");
  c.vc_ratio = j.at("vc_ratio");
  c.penetration_rate = j.at("penetration_rate");
  c.seed = j.at("seed");
  c.idm_accel = j.at("idm_accel");
  c.idm_decel = j.at("idm_decel");
  c.idm_exponent = j.at("idm_exponent");
  const auto& s = j.at("signal");
  c.signal.cycle = s.at("cycle");
  c.signal.amber = s.at("amber");
  c.signal.red = s.at("red");
  c.signal.stop_line_position = s.at("stop_line_position");
  return c;
}

/// CSV rows `t,id,pos_m,speed_mps,is_cv`, 6-decimal fixed point, sorted by
/// (time, id). The companion .meta.json carries the full config and run shape.
inline void write_trajectory(const TrajectoryLog& log, const std::filesystem::path& csv_path) {
  std::ofstream out(csv_path, std::ios::binary);
  if (!out) throw DataError("cannot open " + csv_path.string() + " for writing");
  out << "t,id,pos_m,speed_mps,is_cv\n";
  char line[128];
  for (const auto& slice : log.slices) {
    std::vector<const VehicleState*> by_id;
    by_id.reserve(slice.vehicles.size());
    for (const auto& v : slice.vehicles) by_id.push_back(&v);
    std::sort(by_id.begin(), by_id.end(),
              [](const VehicleState* a, const VehicleState* b) { return a->id < b->id; });
    for (const auto* v : by_id) {
      std::snprintf(line, sizeof line, "%.6f,%d,%.6f,%.6f,%d\n", slice.time, v->id,
                    v->position, v->speed, v->is_cv ? 1 : 0);
      out << line;
    }
  }

  nlohmann::json meta{{"config", to_json(log.config)},
                      {"cycles", log.cycles},
                      {"warmup_cycles", log.warmup_cycles},
                      {"tool_version", kToolVersion}};
  std::filesystem::path meta_path = csv_path;
  meta_path.replace_extension(".meta.json");
  std::ofstream mout(meta_path, std::ios::binary);
  mout << meta.dump(2) << "\n";
}

inline TrajectoryLog read_trajectory(const std::filesystem::path& csv_path) {
  std::filesystem::path meta_path = csv_path;
  meta_path.replace_extension(".meta.json");
  std::ifstream min(meta_path);
  if (!min) throw DataError("missing trajectory metadata " + meta_path.string());
  nlohmann::json meta = nlohmann::json::parse(min);

  TrajectoryLog log;
  log.config = sim_config_from_json(meta.at("config"));
  log.cycles = meta.at("cycles");
  log.warmup_cycles = meta.at("warmup_cycles");

  std::ifstream in(csv_path);
  if (!in) throw DataError("cannot open " + csv_path.string());
  std::string header;
  std::getline(in, header);
  if (header != "t,id,pos_m,speed_mps,is_cv")
    throw DataError("unexpected trajectory header in " + csv_path.string());

  const double horizon = log.cycles * log.config.signal.cycle;
  const auto steps =
      static_cast<std::size_t>(std::llround(horizon / log.config.resolution));
  log.slices.resize(steps);
  for (std::size_t s = 0; s < steps; ++s)
    log.slices[s].time = static_cast<double>(s) * log.config.resolution;

  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    VehicleState v;
    double t = 0.0;
    int cv = 0;
    if (std::sscanf(line.c_str(), "%lf,%d,%lf,%lf,%d", &t, &v.id, &v.position, &v.speed,
                    &cv) != 5)
      throw DataError("bad trajectory row: " + line);
    v.is_cv = cv != 0;
    v.length = log.config.vehicle_length;
    const auto step = static_cast<std::size_t>(std::llround(t / log.config.resolution));
    if (step >= steps) throw DataError("trajectory row outside configured horizon");
    log.slices[step].vehicles.push_back(v);
  }
  for (auto& slice : log.slices) {
    std::sort(slice.vehicles.begin(), slice.vehicles.end(),
              [](const VehicleState& a, const VehicleState& b) {
                return a.position > b.position;
              });
  }
  return log;
}

}  // namespace cvls::sim
