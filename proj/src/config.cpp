#include "config.hpp"

#include <fstream>

namespace cvls::pipeline {

namespace {

std::string strip(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double as_double(const ConfigMap& m, const std::string& key, double fallback) {
  auto it = m.find(key);
  if (it == m.end()) return fallback;
  try {
    return std::stod(it->second);
  } catch (const std::exception&) {
    throw DataError("config key " + key + " is not a number: " + it->second);
  }
}

long as_long(const ConfigMap& m, const std::string& key, long fallback) {
  auto it = m.find(key);
  if (it == m.end()) return fallback;
  try {
    return std::stol(it->second);
  } catch (const std::exception&) {
    throw DataError("config key " + key + " is not an integer: " + it->second);
  }
}

std::string as_string(const ConfigMap& m, const std::string& key,
                      const std::string& fallback) {
  auto it = m.find(key);
  return it == m.end() ? fallback : it->second;
}

}  // namespace

ConfigMap parse_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config file " + path.string());
  ConfigMap out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = strip(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw DataError("config line " + std::to_string(lineno) + " has no '='");
    const std::string key = strip(line.substr(0, eq));
    const std::string val = strip(line.substr(eq + 1));
    if (key.empty()) throw DataError("config line " + std::to_string(lineno) + " has no key");
    out[key] = val;
  }
  return out;
}

void apply_sim_keys(const ConfigMap& cfg, sim::SimConfig& out) {
  out.link_length = as_double(cfg, "sim.link_length", out.link_length);
  out.free_flow_speed = as_double(cfg, "sim.free_flow_speed", out.free_flow_speed);
  out.vehicle_length = as_double(cfg, "sim.vehicle_length", out.vehicle_length);
  out.min_gap = as_double(cfg, "sim.min_gap", out.min_gap);
  out.desired_headway = as_double(cfg, "sim.desired_headway", out.desired_headway);
  out.resolution = as_double(cfg, "sim.resolution", out.resolution);
  out.vc_ratio = as_double(cfg, "sim.vc_ratio", out.vc_ratio);
  out.penetration_rate = as_double(cfg, "sim.penetration_rate", out.penetration_rate);
  out.idm_accel = as_double(cfg, "sim.idm_accel", out.idm_accel);
  out.idm_decel = as_double(cfg, "sim.idm_decel", out.idm_decel);
  out.idm_exponent = as_double(cfg, "sim.idm_exponent", out.idm_exponent);
  out.seed = static_cast<std::uint64_t>(as_long(cfg, "sim.seed", static_cast<long>(out.seed)));
  out.signal.cycle = as_double(cfg, "signal.cycle", out.signal.cycle);
  out.signal.amber = as_double(cfg, "signal.amber", out.signal.amber);
  out.signal.red = as_double(cfg, "signal.red", out.signal.red);
  out.signal.stop_line_position =
      as_double(cfg, "signal.stop_line_position", out.signal.stop_line_position);
}

void apply_train_keys(const ConfigMap& cfg, train::TrainConfig& out) {
  out.learning_rate = as_double(cfg, "train.learning_rate", out.learning_rate);
  out.weight_decay = as_double(cfg, "train.weight_decay", out.weight_decay);
  out.beta1 = as_double(cfg, "train.beta1", out.beta1);
  out.beta2 = as_double(cfg, "train.beta2", out.beta2);
  out.adam_eps = as_double(cfg, "train.adam_eps", out.adam_eps);
  out.batch_size = static_cast<int>(as_long(cfg, "train.batch_size", out.batch_size));
  out.epochs = static_cast<int>(as_long(cfg, "train.epochs", out.epochs));
  out.mu = as_double(cfg, "train.mu", out.mu);
  out.k = static_cast<int>(as_long(cfg, "train.k", out.k));
  out.d_e = static_cast<int>(as_long(cfg, "train.d_e", out.d_e));
  out.seed = static_cast<std::uint64_t>(as_long(cfg, "train.seed", static_cast<long>(out.seed)));
  out.lr_schedule = as_string(cfg, "train.lr_schedule", out.lr_schedule);
  out.hidden = static_cast<int>(as_long(cfg, "train.hidden", out.hidden));
  out.heads = static_cast<int>(as_long(cfg, "train.heads", out.heads));
  out.patch = static_cast<int>(as_long(cfg, "train.patch", out.patch));
  out.encoder_blocks =
      static_cast<int>(as_long(cfg, "train.encoder_blocks", out.encoder_blocks));
  out.decoder_blocks =
      static_cast<int>(as_long(cfg, "train.decoder_blocks", out.decoder_blocks));
  out.kappa = as_double(cfg, "train.kappa", out.kappa);
  out.eta = as_double(cfg, "train.eta", out.eta);
  out.lambda = as_double(cfg, "train.lambda", out.lambda);
  out.epsilon = as_double(cfg, "train.epsilon", out.epsilon);
  out.ista_variant = as_string(cfg, "train.ista_variant", out.ista_variant);
}

Preset preset_by_name(const std::string& name) {
  Preset p;
  if (name == "desk" || name.empty()) {
    p.sim.link_length = 200.0;
    p.cycles = 12;
    p.train.batch_size = 32;
  } else if (name == "paper") {
    p.sim.link_length = 1000.0;
    p.cycles = 60;
    p.train.batch_size = 256;
  } else {
    throw DataError("unknown preset: " + name + " (expected desk or paper)");
  }
  return p;
}

}  // namespace cvls::pipeline
