#include "pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <future>
#include <sstream>

#include "cvls/eval/analysis.hpp"

namespace cvls::pipeline {

namespace {

std::string trim_num(double v) {
  char b[32];
  std::snprintf(b, sizeof b, "%g", v);
  return b;
}

}  // namespace

std::string ScenarioSpec::name() const {
  std::ostringstream os;
  os << "red" << trim_num(red) << "_vc" << trim_num(vc_ratio) << "_pen"
     << trim_num(penetration) << "_seed" << seed;
  return os.str();
}

std::vector<ScenarioSpec> scenario_grid(double penetration, int cycles, std::uint64_t seed) {
  std::vector<ScenarioSpec> out;
  for (double red : {15.0, 30.0, 45.0})
    for (double vc : {0.3, 0.6, 0.9}) out.push_back({red, vc, penetration, cycles, seed});
  return out;
}

sim::SimConfig make_sim_config(const ScenarioSpec& spec, const sim::SimConfig& base) {
  sim::SimConfig cfg = base;
  cfg.signal.red = spec.red;
  cfg.vc_ratio = spec.vc_ratio;
  cfg.penetration_rate = spec.penetration;
  // distinct stream per scenario so the grid shares no draws
  cfg.seed = splitmix64(spec.seed ^ fnv1a64(spec.name().data(), spec.name().size()));
  return cfg;
}

std::uint64_t fingerprint_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot fingerprint " + path.string());
  std::uint64_t h = 0xcbf29ce484222325ull;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    h = fnv1a64(buf, static_cast<std::size_t>(in.gcount()), h);
  }
  return h;
}

void write_manifest(const fs::path& out_dir, const std::string& command,
                    const nlohmann::json& config, const std::vector<fs::path>& inputs,
                    const std::vector<fs::path>& outputs, double elapsed_s) {
  nlohmann::json jin = nlohmann::json::object();
  for (const auto& p : inputs) {
    char hex[24];
    std::snprintf(hex, sizeof hex, "%016llx",
                  static_cast<unsigned long long>(fingerprint_file(p)));
    jin[p.string()] = hex;
  }
  nlohmann::json jout = nlohmann::json::array();
  for (const auto& p : outputs) jout.push_back(p.string());
  const std::string cfg_dump = config.dump();
  char cfg_hash[24];
  std::snprintf(cfg_hash, sizeof cfg_hash, "%016llx",
                static_cast<unsigned long long>(fnv1a64(cfg_dump.data(), cfg_dump.size())));
  nlohmann::json m{{"command", command},       {"config", config},
                   {"config_hash", cfg_hash},  {"inputs", jin},
                   {"outputs", jout},          {"elapsed_s", elapsed_s},
                   {"tool_version", kToolVersion}};
  std::ofstream out(out_dir / (command + "_manifest.json"), std::ios::binary);
  out << m.dump(2) << "\n";
}

std::vector<fs::path> run_simulate(const std::vector<ScenarioSpec>& specs,
                                   const sim::SimConfig& base, const fs::path& out_dir,
                                   int jobs) {
  const auto t0 = std::chrono::steady_clock::now();
  fs::create_directories(out_dir);
  std::vector<fs::path> outputs(specs.size());

  auto worker = [&](std::size_t i) {
    const ScenarioSpec& spec = specs[i];
    const sim::SimConfig cfg = make_sim_config(spec, base);
    const sim::TrajectoryLog log = sim::run_scenario(cfg, spec.cycles);
    const fs::path csv = out_dir / ("sim_" + spec.name() + ".csv");
    sim::write_trajectory(log, csv);
    outputs[i] = csv;
  };

  if (jobs <= 1) {
    for (std::size_t i = 0; i < specs.size(); ++i) worker(i);
  } else {
    std::vector<std::future<void>> pending;
    for (std::size_t i = 0; i < specs.size(); ++i) {
      pending.push_back(std::async(std::launch::async, worker, i));
      if (pending.size() >= static_cast<std::size_t>(jobs)) {
        for (auto& f : pending) f.get();
        pending.clear();
      }
    }
    for (auto& f : pending) f.get();
  }

  nlohmann::json cfg_json{{"base", sim::to_json(base)}, {"scenarios", specs.size()}};
  const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_manifest(out_dir, "simulate", cfg_json, {}, outputs, dt);
  return outputs;
}

DatasetSplit build_dataset(const std::vector<sim::TrajectoryLog>& logs, int k) {
  require(!logs.empty(), "build_dataset: no trajectory logs");
  require(k >= 1, "build_dataset: k must be at least 1");
  const rco::GridConfig grid = rco::GridConfig::from_sim(logs[0].config);

  struct Planned {
    const sim::TrajectoryLog* log;
    int scenario;
    double t;
    bool test;
  };
  std::vector<Planned> plan;
  DatasetSplit split;
  split.train.grid = split.test.grid = grid;
  split.train.k = split.test.k = k;

  for (std::size_t li = 0; li < logs.size(); ++li) {
    const auto& log = logs[li];
    require(log.config.link_length == grid.link_length &&
                log.config.free_flow_speed == grid.free_flow_speed,
            "build_dataset: logs disagree on geometry");
    const double cycle = log.config.signal.cycle;
    const int usable = log.cycles - log.warmup_cycles;
    require(usable >= 2, "build_dataset: need at least two post-warm-up cycles");
    const int n_train = std::max(1, static_cast<int>(usable * 0.9));
    const double train_end = (log.warmup_cycles + n_train) * cycle;
    const double horizon = log.cycles * cycle;
    double t0 = log.warmup_end();
    if (t0 < k - 1) t0 = k - 1;  // window history must exist
    if (static_cast<double>(k - 1) > log.warmup_end() && log.warmup_cycles > 0)
      throw ContractError("build_dataset: k exceeds the warm-up history");

    rco::ScenarioInfo info;
    info.red = log.config.signal.red;
    info.vc_ratio = log.config.vc_ratio;
    info.penetration = log.config.penetration_rate;
    info.seed = log.config.seed;
    info.name = "scenario_" + std::to_string(li);
    split.train.scenarios.push_back(info);
    split.test.scenarios.push_back(info);

    for (double t = t0; t < horizon - 0.5; t += 1.0)
      plan.push_back({&log, static_cast<int>(li), t, t >= train_end});
  }
  require(!plan.empty(), "build_dataset: k larger than the available history");

  Eigen::Index n_train_s = 0, n_test_s = 0;
  for (const auto& p : plan) (p.test ? n_test_s : n_train_s)++;
  const auto din = static_cast<Eigen::Index>(grid.lanes) * grid.cells() * 2 * k;
  const auto dout = static_cast<Eigen::Index>(grid.lanes) * grid.cells() * 2;
  split.train.windows.resize(din, n_train_s);
  split.train.targets.resize(dout, n_train_s);
  split.test.windows.resize(din, n_test_s);
  split.test.targets.resize(dout, n_test_s);

  Eigen::Index ci_train = 0, ci_test = 0;
  for (const auto& p : plan) {
    auto [w, target] = rco::window(*p.log, p.t, k, grid);
    rco::Dataset& d = p.test ? split.test : split.train;
    Eigen::Index& col = p.test ? ci_test : ci_train;
    rco::append_sample(d, col, w, target);
    d.sample_scenario.push_back(p.scenario);
    d.sample_time.push_back(p.t);
    ++col;
  }
  return split;
}

fs::path run_dataset(const std::vector<fs::path>& trajectory_csvs, int k,
                     const fs::path& out_dir) {
  const auto t0 = std::chrono::steady_clock::now();
  require(!trajectory_csvs.empty(), "dataset: no trajectory files given");
  std::vector<sim::TrajectoryLog> logs;
  for (const auto& p : trajectory_csvs) logs.push_back(sim::read_trajectory(p));
  DatasetSplit split = build_dataset(logs, k);

  fs::create_directories(out_dir);
  rco::save_dataset(split.train, out_dir / "train");
  rco::save_dataset(split.test, out_dir / "test");

  nlohmann::json sm{{"k", k},
                    {"train_samples", split.train.size()},
                    {"test_samples", split.test.size()},
                    {"split", "cycle-wise 90/10 after warm-up"}};
  std::ofstream out(out_dir / "split_manifest.json", std::ios::binary);
  out << sm.dump(2) << "\n";

  const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_manifest(out_dir, "dataset", sm, trajectory_csvs,
                 {out_dir / "train", out_dir / "test"}, dt);
  return out_dir;
}

TrainOutputs run_train(const fs::path& dataset_dir, const train::TrainConfig& tc,
                       const fs::path& out_dir, const std::optional<fs::path>& resume_from) {
  const auto t0 = std::chrono::steady_clock::now();
  const rco::Dataset data = rco::load_dataset(dataset_dir / "train");
  require(data.k == tc.k, "train: dataset was built with a different k");
  fs::create_directories(out_dir / "checkpoints");

  crate::CrateParams<float> params;
  train::AdamW<float> opt(tc.adamw());
  int start_epoch = 0;

  if (resume_from) {
    auto loaded = crate::load_checkpoint<float>(*resume_from);
    params = std::move(loaded.params);
    start_epoch = loaded.meta.at("epoch").get<int>() + 1;
    std::vector<MatrixF> m, v;
    for (std::size_t i = 0;; ++i) {
      const std::string mk = "opt.m." + std::to_string(i);
      const std::string vk = "opt.v." + std::to_string(i);
      if (!loaded.extra.count(mk)) break;
      m.push_back(loaded.extra.at(mk));
      v.push_back(loaded.extra.at(vk));
    }
    opt.restore(std::move(m), std::move(v), loaded.meta.at("opt_step").get<std::int64_t>());
  } else {
    params = crate::init_params<float>(tc.crate_config(data.grid), tc.seed);
  }

  auto save = [&](int epoch, crate::CrateParams<float>& p, train::AdamW<float>& o,
                  const fs::path& path) {
    std::vector<std::pair<std::string, MatrixF>> extra;
    for (std::size_t i = 0; i < o.first_moments().size(); ++i) {
      extra.push_back({"opt.m." + std::to_string(i), o.first_moments()[i]});
      extra.push_back({"opt.v." + std::to_string(i), o.second_moments()[i]});
    }
    nlohmann::json meta{{"epoch", epoch},
                        {"opt_step", o.step_count()},
                        {"train_config", train::to_json(tc)},
                        {"parameter_count", p.parameter_count()}};
    crate::save_checkpoint<float>(path, p, meta, extra);
  };

  TrainOutputs out;
  std::vector<double> history = train::train(
      data, tc, params, opt, start_epoch,
      [&](int epoch, crate::CrateParams<float>& p, train::AdamW<float>& o, double) {
        char name[64];
        std::snprintf(name, sizeof name, "epoch_%03d.ckpt", epoch);
        save(epoch, p, o, out_dir / "checkpoints" / name);
      });
  out.history = history;

  out.final_checkpoint = out_dir / "checkpoints" / "final.ckpt";
  save(tc.epochs - 1, params, opt, out.final_checkpoint);

  out.loss_curve_csv = out_dir / "loss_curve.csv";
  {
    std::ofstream lc(out.loss_curve_csv, std::ios::binary);
    lc << "epoch,train_loss\n";
    char line[64];
    for (std::size_t e = 0; e < history.size(); ++e) {
      std::snprintf(line, sizeof line, "%d,%.9g\n", static_cast<int>(e) + start_epoch,
                    history[e]);
      lc << line;
    }
  }

  nlohmann::json manifest_cfg{{"train_config", train::to_json(tc)},
                              {"dataset", dataset_dir.string()},
                              {"per_epoch_loss", history},
                              {"start_epoch", start_epoch}};
  const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_manifest(out_dir, "train", manifest_cfg,
                 {dataset_dir / "train" / "windows.bin", dataset_dir / "train" / "targets.bin"},
                 {out.final_checkpoint, out.loss_curve_csv}, dt);
  return out;
}

EvalOutputs run_eval(const fs::path& checkpoint, const fs::path& dataset_dir,
                     double threshold, bool include_baseline, const fs::path& out_dir) {
  const auto t0 = std::chrono::steady_clock::now();
  const rco::Dataset data = rco::load_dataset(dataset_dir / "test");
  auto loaded = crate::load_checkpoint<float>(checkpoint);
  fs::create_directories(out_dir);

  eval::EvalReport report;
  report.threshold = threshold;
  for (const auto* note : kMatchingNotes) report.notes.push_back(note);
  report.scenarios = data.scenarios;

  std::vector<eval::SampleMatches> dump;
  report.methods.push_back(eval::evaluate_model(loaded.params, data, threshold, &dump));
  if (include_baseline)
    report.methods.push_back(eval::evaluate_baseline(data, threshold));

  EvalOutputs out;
  out.report = report;
  out.report_json = out_dir / "report.json";
  out.report_csv = out_dir / "report.csv";
  out.matches_csv = out_dir / "matches.csv";
  eval::write_report_json(report, out.report_json);
  eval::write_report_csv(report, out.report_csv);
  eval::write_matches_csv(dump, out.matches_csv);

  nlohmann::json cfg{{"checkpoint", checkpoint.string()},
                     {"dataset", dataset_dir.string()},
                     {"threshold", threshold},
                     {"baseline", include_baseline}};
  const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_manifest(out_dir, "eval", cfg, {checkpoint},
                 {out.report_json, out.report_csv, out.matches_csv}, dt);
  return out;
}

SweepOutputs run_sweep_k(const std::vector<fs::path>& trajectory_csvs,
                         const std::vector<int>& ks, const train::TrainConfig& base_tc,
                         double threshold, const fs::path& out_dir) {
  const auto t0 = std::chrono::steady_clock::now();
  require(!ks.empty(), "sweep-k: empty k range");
  fs::create_directories(out_dir);

  // group trajectories by penetration so each k trains per penetration
  std::vector<sim::TrajectoryLog> logs;
  for (const auto& p : trajectory_csvs) logs.push_back(sim::read_trajectory(p));
  std::map<double, std::vector<const sim::TrajectoryLog*>> by_pen;
  for (const auto& log : logs) by_pen[log.config.penetration_rate].push_back(&log);

  std::map<int, std::map<double, eval::MethodReport>> results;
  for (int k : ks) {
    for (const auto& [pen, group] : by_pen) {
      std::vector<sim::TrajectoryLog> group_logs;
      for (const auto* l : group) group_logs.push_back(*l);
      DatasetSplit split = build_dataset(group_logs, k);
      train::TrainConfig tc = base_tc;
      tc.k = k;
      crate::CrateParams<float> params =
          crate::init_params<float>(tc.crate_config(split.train.grid), tc.seed);
      train::AdamW<float> opt(tc.adamw());
      train::train(split.train, tc, params, opt);
      results[k][pen] = eval::evaluate_model(params, split.test, threshold);
    }
  }

  SweepOutputs out;
  out.f1_csv = out_dir / "sweep_f1.csv";
  out.rmse_csv = out_dir / "sweep_rmse.csv";
  for (const auto& [path, want_f1] :
       std::vector<std::pair<fs::path, bool>>{{out.f1_csv, true}, {out.rmse_csv, false}}) {
    std::ofstream csv(path, std::ios::binary);
    csv << "k";
    for (const auto& [pen, group] : by_pen) csv << ",pen_" << trim_num(pen);
    csv << "\n";
    for (int k : ks) {
      csv << k;
      for (const auto& [pen, group] : by_pen) {
        const auto& rep = results[k][pen];
        char b[32];
        if (want_f1)
          std::snprintf(b, sizeof b, ",%.6f", rep.prf.f1);
        else if (rep.rmse)
          std::snprintf(b, sizeof b, ",%.6f", *rep.rmse);
        else
          std::snprintf(b, sizeof b, ",");
        csv << b;
      }
      csv << "\n";
    }
  }

  nlohmann::json cfg{{"ks", ks}, {"threshold", threshold}};
  const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_manifest(out_dir, "sweep-k", cfg, trajectory_csvs, {out.f1_csv, out.rmse_csv}, dt);
  return out;
}

fs::path run_analyze(const fs::path& checkpoint, const fs::path& dataset_dir,
                     const fs::path& out_dir) {
  const auto t0 = std::chrono::steady_clock::now();
  const rco::Dataset data = rco::load_dataset(dataset_dir / "test");
  auto loaded = crate::load_checkpoint<float>(checkpoint);
  fs::create_directories(out_dir);

  const std::vector<double> profile = eval::coding_rate_profile(loaded.params, data);
  const fs::path csv = out_dir / "coding_rate_profile.csv";
  std::ofstream out(csv, std::ios::binary);
  out << "encoder_layer,mean_coding_rate\n";
  char line[64];
  for (std::size_t i = 0; i < profile.size(); ++i) {
    std::snprintf(line, sizeof line, "%d,%.9g\n", static_cast<int>(i) + 1, profile[i]);
    out << line;
  }
  out.close();

  nlohmann::json cfg{{"checkpoint", checkpoint.string()}, {"dataset", dataset_dir.string()}};
  const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_manifest(out_dir, "analyze", cfg, {checkpoint}, {csv}, dt);
  return csv;
}

}  // namespace cvls::pipeline
