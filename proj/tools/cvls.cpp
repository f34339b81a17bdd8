#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "../src/config.hpp"
#include "../src/pipeline.hpp"

namespace fs = std::filesystem;
using namespace cvls;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

fs::path default_out_root() {
  if (const char* env = std::getenv("CVLS_OUT_ROOT")) return fs::path(env);
  return fs::path("out");
}

std::vector<fs::path> csvs_in_dir(const fs::path& dir) {
  std::vector<fs::path> out;
  if (!fs::is_directory(dir)) throw DataError("not a directory: " + dir.string());
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().extension() == ".csv" && e.path().filename().string().rfind("sim_", 0) == 0)
      out.push_back(e.path());
  std::sort(out.begin(), out.end());
  if (out.empty()) throw DataError("no sim_*.csv trajectories in " + dir.string());
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"connected-vehicle location/speed estimation lab"};
  app.require_subcommand(1);

  std::string config_path;
  std::string preset_name = "desk";
  std::string out_dir_s = (default_out_root()).string();
  std::uint64_t seed = 1;
  int jobs = 1;
  app.add_option("--config", config_path, "key-value config file (flags override it)");
  app.add_option("--preset", preset_name, "desk (200 m, 12 cycles) or paper (1 km, 60 cycles)");
  app.add_option("--out-dir", out_dir_s, "output directory (default $CVLS_OUT_ROOT or ./out)");
  app.add_option("--seed", seed, "master seed");
  app.add_option("--jobs", jobs, "parallel scenario workers for simulate");

  // simulate
  auto* sim_cmd = app.add_subcommand("simulate", "run scenarios, write trajectory CSVs");
  bool grid = false;
  std::vector<double> reds{30.0}, vcs{0.6}, pens{0.4};
  int cycles = -1;
  sim_cmd->add_flag("--grid", grid, "full red {15,30,45} x V/C {0.3,0.6,0.9} grid");
  sim_cmd->add_option("--red", reds, "red period(s) in seconds");
  sim_cmd->add_option("--vc", vcs, "V/C ratio(s)");
  sim_cmd->add_option("--penetration", pens, "CV penetration rate(s)");
  sim_cmd->add_option("--cycles", cycles, "signal cycles per scenario (preset default)");

  // dataset
  auto* ds_cmd = app.add_subcommand("dataset", "build (window, target) tensor shards");
  std::string traj_dir;
  int k = 4;
  ds_cmd->add_option("--traj-dir", traj_dir, "directory with sim_*.csv trajectories")
      ->required();
  ds_cmd->add_option("--k", k, "past time steps per input window");

  // train
  auto* tr_cmd = app.add_subcommand("train", "train the estimator on a dataset");
  std::string dataset_dir;
  std::string resume;
  train::TrainConfig tc_cli;
  tr_cmd->add_option("--dataset", dataset_dir, "dataset directory from `dataset`")->required();
  tr_cmd->add_option("--epochs", tc_cli.epochs, "training epochs");
  tr_cmd->add_option("--lr", tc_cli.learning_rate, "initial learning rate");
  tr_cmd->add_option("--batch", tc_cli.batch_size, "batch size");
  tr_cmd->add_option("--mu", tc_cli.mu, "safety-penalty weight");
  tr_cmd->add_option("--k", tc_cli.k, "past time steps (must match the dataset)");
  tr_cmd->add_option("--hidden", tc_cli.hidden, "token dimension");
  tr_cmd->add_option("--resume", resume, "checkpoint to resume from");

  // eval
  auto* ev_cmd = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
  std::string ckpt;
  double threshold = 5.0;
  bool with_baseline = false;
  ev_cmd->add_option("--checkpoint", ckpt, "model checkpoint")->required();
  ev_cmd->add_option("--dataset", dataset_dir, "dataset directory")->required();
  ev_cmd->add_option("--threshold", threshold, "match threshold in meters");
  ev_cmd->add_flag("--baseline", with_baseline, "also evaluate the interpolation baseline");

  // sweep-k
  auto* sw_cmd = app.add_subcommand("sweep-k", "train/evaluate across a k range");
  int k_min = 1, k_max = 6;
  sw_cmd->add_option("--traj-dir", traj_dir, "directory with sim_*.csv trajectories")
      ->required();
  sw_cmd->add_option("--k-min", k_min, "first k");
  sw_cmd->add_option("--k-max", k_max, "last k");
  sw_cmd->add_option("--epochs", tc_cli.epochs, "training epochs");
  sw_cmd->add_option("--threshold", threshold, "match threshold in meters");

  // analyze
  auto* an_cmd = app.add_subcommand("analyze", "per-layer coding-rate profile");
  an_cmd->add_option("--checkpoint", ckpt, "model checkpoint")->required();
  an_cmd->add_option("--dataset", dataset_dir, "dataset directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    pipeline::Preset preset = pipeline::preset_by_name(preset_name);
    if (!config_path.empty()) {
      const pipeline::ConfigMap cfg = pipeline::parse_config_file(config_path);
      pipeline::apply_sim_keys(cfg, preset.sim);
      pipeline::apply_train_keys(cfg, preset.train);
    }
    const fs::path out_dir(out_dir_s);

    if (sim_cmd->parsed()) {
      if (grid) {
        reds = {15.0, 30.0, 45.0};
        vcs = {0.3, 0.6, 0.9};
      }
      if (cycles <= 0) cycles = preset.cycles;
      std::vector<pipeline::ScenarioSpec> specs;
      for (double pen : pens)
        for (double red : reds)
          for (double vc : vcs) specs.push_back({red, vc, pen, cycles, seed});
      const auto files = pipeline::run_simulate(specs, preset.sim, out_dir, jobs);
      std::cout << "wrote " << files.size() << " trajectory file(s) to " << out_dir.string()
                << "\n";
    } else if (ds_cmd->parsed()) {
      pipeline::run_dataset(csvs_in_dir(traj_dir), k, out_dir);
      std::cout << "dataset written to " << out_dir.string() << "\n";
    } else if (tr_cmd->parsed()) {
      train::TrainConfig tc = preset.train;
      // CLI flags override preset/config values
      if (tr_cmd->count("--epochs")) tc.epochs = tc_cli.epochs;
      if (tr_cmd->count("--lr")) tc.learning_rate = tc_cli.learning_rate;
      if (tr_cmd->count("--batch")) tc.batch_size = tc_cli.batch_size;
      if (tr_cmd->count("--mu")) tc.mu = tc_cli.mu;
      if (tr_cmd->count("--k")) tc.k = tc_cli.k;
      if (tr_cmd->count("--hidden")) tc.hidden = tc_cli.hidden;
      if (app.count("--seed")) tc.seed = seed;
      std::optional<fs::path> resume_path;
      if (!resume.empty()) resume_path = fs::path(resume);
      const auto out = pipeline::run_train(dataset_dir, tc, out_dir, resume_path);
      std::cout << "final checkpoint: " << out.final_checkpoint.string() << "\n";
      if (!out.history.empty())
        std::cout << "final train loss: " << out.history.back() << "\n";
    } else if (ev_cmd->parsed()) {
      const auto out = pipeline::run_eval(ckpt, dataset_dir, threshold, with_baseline, out_dir);
      for (const auto& m : out.report.methods)
        std::cout << m.name << ": precision " << m.prf.precision << ", recall "
                  << m.prf.recall << ", f1 " << m.prf.f1
                  << (m.rmse ? ", rmse " + std::to_string(*m.rmse) : std::string(", rmse n/a"))
                  << "\n";
    } else if (sw_cmd->parsed()) {
      if (k_min < 1 || k_max < k_min) throw DataError("bad k range");
      std::vector<int> ks;
      for (int kk = k_min; kk <= k_max; ++kk) ks.push_back(kk);
      train::TrainConfig tc = preset.train;
      if (sw_cmd->count("--epochs")) tc.epochs = tc_cli.epochs;
      if (app.count("--seed")) tc.seed = seed;
      const auto out =
          pipeline::run_sweep_k(csvs_in_dir(traj_dir), ks, tc, threshold, out_dir);
      std::cout << "tables: " << out.f1_csv.string() << ", " << out.rmse_csv.string() << "\n";
    } else if (an_cmd->parsed()) {
      const auto csv = pipeline::run_analyze(ckpt, dataset_dir, out_dir);
      std::cout << "profile: " << csv.string() << "\n";
    }
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const SimulationError& e) {
    std::cerr << "simulation error: " << e.what() << "\n";
    return kExitData;
  } catch (const ContractError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return 0;
}
