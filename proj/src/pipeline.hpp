#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cvls/crate/checkpoint.hpp"
#include "cvls/eval/report.hpp"
#include "cvls/rco/tensor_io.hpp"
#include "cvls/sim/trajectory_io.hpp"
#include "cvls/train/trainer.hpp"

namespace cvls::pipeline {

namespace fs = std::filesystem;

/// One simulation scenario of the signal-plan x demand grid.
struct ScenarioSpec {
  double red = 30.0;
  double vc_ratio = 0.6;
  double penetration = 0.4;
  int cycles = 12;
  std::uint64_t seed = 1;

  std::string name() const;
};

/// The 3 x 3 grid of red periods {15,30,45} and V/C ratios {0.3,0.6,0.9}.
std::vector<ScenarioSpec> scenario_grid(double penetration, int cycles, std::uint64_t seed);

sim::SimConfig make_sim_config(const ScenarioSpec& spec, const sim::SimConfig& base);

std::uint64_t fingerprint_file(const fs::path& path);

void write_manifest(const fs::path& out_dir, const std::string& command,
                    const nlohmann::json& config,
                    const std::vector<fs::path>& inputs,
                    const std::vector<fs::path>& outputs, double elapsed_s);

/// simulate: one trajectory CSV + metadata per scenario, deterministic per
/// seed. Returns the CSV paths in scenario order.
std::vector<fs::path> run_simulate(const std::vector<ScenarioSpec>& specs,
                                   const sim::SimConfig& base, const fs::path& out_dir,
                                   int jobs = 1);

struct DatasetSplit {
  rco::Dataset train;
  rco::Dataset test;
};

/// Per-second (window, target) samples from the logs, split cycle-wise 90/10
/// after the warm-up cycles.
DatasetSplit build_dataset(const std::vector<sim::TrajectoryLog>& logs, int k);

/// dataset: loads trajectory CSVs, builds the split, writes train/ and test/
/// shards plus a split manifest. Returns the dataset root.
fs::path run_dataset(const std::vector<fs::path>& trajectory_csvs, int k,
                     const fs::path& out_dir);

struct TrainOutputs {
  fs::path final_checkpoint;
  fs::path loss_curve_csv;
  std::vector<double> history;
};

/// train: AdamW on the train split; per-epoch checkpoints (with optimizer
/// state for resuming) plus a loss-curve CSV and training manifest.
TrainOutputs run_train(const fs::path& dataset_dir, const train::TrainConfig& tc,
                       const fs::path& out_dir,
                       const std::optional<fs::path>& resume_from = {});

struct EvalOutputs {
  fs::path report_json;
  fs::path report_csv;
  fs::path matches_csv;
  eval::EvalReport report;
};

/// eval: matching-based metrics of the checkpointed model on the test split,
/// optionally next to the interpolation baseline.
EvalOutputs run_eval(const fs::path& checkpoint, const fs::path& dataset_dir,
                     double threshold, bool include_baseline, const fs::path& out_dir);

/// sweep-k: one model per (k, dataset); emits F1 and RMSE tables with one row
/// per k and one column per penetration-labelled dataset.
struct SweepOutputs {
  fs::path f1_csv;
  fs::path rmse_csv;
};
SweepOutputs run_sweep_k(const std::vector<fs::path>& trajectory_csvs,
                         const std::vector<int>& ks, const train::TrainConfig& base_tc,
                         double threshold, const fs::path& out_dir);

/// analyze: per-encoder-layer mean coding rate on the test split.
fs::path run_analyze(const fs::path& checkpoint, const fs::path& dataset_dir,
                     const fs::path& out_dir);

inline const char* kMatchingNotes[] = {
    "match threshold is configurable; 5 m (one vehicle length) by default",
    "order-preserving greedy matching within CV-delimited segments",
    "CVs excluded from TP/FP/FN scoring; truth positions are cell-quantized"};

}  // namespace cvls::pipeline
