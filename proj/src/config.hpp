#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "cvls/sim/simulator.hpp"
#include "cvls/train/trainer.hpp"

namespace cvls::pipeline {

/// Plain hierarchical key-value text: one `section.key = value` per line,
/// `#` comments. Values stay strings until applied.
using ConfigMap = std::map<std::string, std::string>;

ConfigMap parse_config_file(const std::filesystem::path& path);

/// Applies `sim.*` and `signal.*` keys; unknown keys under those prefixes are
/// an error, other prefixes are ignored.
void apply_sim_keys(const ConfigMap& cfg, sim::SimConfig& out);

/// Applies `train.*` keys.
void apply_train_keys(const ConfigMap& cfg, train::TrainConfig& out);

struct Preset {
  sim::SimConfig sim;
  train::TrainConfig train;
  int cycles = 12;
};

/// `desk`: 200 m link, 12 cycles, batch 32 — the scaled-down lab
/// configuration. `paper`: 1 km link, 60 cycles, batch 256.
Preset preset_by_name(const std::string& name);

}  // namespace cvls::pipeline
