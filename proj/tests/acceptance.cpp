// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Run through ctest as `acceptance`, or directly:
//   cvls_acceptance --cli path/to/cvls [--work dir]

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "cvls/eval/analysis.hpp"
#include "pipeline.hpp"

using namespace cvls;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int id;
  std::string label;
  bool pass;
  std::string detail;
};

std::vector<Outcome> g_outcomes;

void report(int id, const std::string& label, bool pass, const std::string& detail) {
  std::printf("criterion %2d [%s] %s%s%s\n", id, pass ? "PASS" : "FAIL", label.c_str(),
              detail.empty() ? "" : " -- ", detail.c_str());
  std::fflush(stdout);
  g_outcomes.push_back({id, label, pass, detail});
}

sim::SimConfig desk_base() {
  sim::SimConfig cfg;
  cfg.link_length = 200.0;
  return cfg;
}

train::TrainConfig desk_train(std::uint64_t seed) {
  train::TrainConfig tc;
  tc.batch_size = 32;
  tc.seed = seed;
  return tc;
}

// ---------------------------------------------------------------- criterion 1

void criterion_gradients() {
  const auto t0 = std::chrono::steady_clock::now();
  crate::CrateConfig cfg;
  cfg.cells = 20;
  cfg.k = 2;
  cfg.patch = 5;
  cfg.hidden = 8;
  cfg.heads = 2;
  cfg.encoder_blocks = 6;
  cfg.decoder_blocks = 4;
  cfg.d_e = 3;
  cfg.kappa = 0.25;
  cfg.epsilon = 1.0;
  auto params = crate::init_params<double>(cfg, 18);

  RngStream rng(15);
  VectorD x(cfg.input_dim());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (i % 2 == 0)
      x[i] = rng.bernoulli(0.3) ? 1.0 : 0.0;
    else
      x[i] = x[i - 1] > 0.5 ? rng.uniform01() : -1.0;
  }
  MatrixD target = MatrixD::Zero(2, cfg.total_cells());
  for (int c = 0; c < cfg.total_cells(); ++c) {
    target(0, c) = x[c * cfg.k * 2] > 0.5 ? 1.0 : 0.0;
    target(1, c) = target(0, c) > 0.5 ? 0.4 : -1.0;
  }
  const double mu = 0.1;

  auto loss_at = [&]() {
    const MatrixD raw = crate::forward<double>(x, params);
    return static_cast<double>(
        train::total_loss<double>(raw, target, mu, cfg.d_e, cfg.lanes, cfg.cells).value);
  };

  crate::ForwardCache<double> cache;
  const MatrixD raw = crate::forward<double>(x, params, &cache);
  const auto loss = train::total_loss<double>(raw, target, mu, cfg.d_e, cfg.lanes, cfg.cells);
  auto grads = crate::CrateGrads<double>::zeros_like(params);
  crate::backward<double>(loss.grad, params, cache, grads);

  const double step = 1e-4;
  double worst = 0.0;
  std::size_t n_checked = 0;
  auto plist = params.tensors();
  auto glist = grads.tensors();
  for (std::size_t ti = 0; ti < plist.size(); ++ti) {
    Matrix<double>& t = *plist[ti].second;
    for (Eigen::Index idx = 0; idx < t.size(); ++idx) {
      const double saved = t(idx);
      t(idx) = saved + step;
      const double up = loss_at();
      t(idx) = saved - step;
      const double dn = loss_at();
      t(idx) = saved;
      const double fd = (up - dn) / (2.0 * step);
      const double an = (*glist[ti])(idx);
      worst = std::max(worst, std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-3}));
      ++n_checked;
    }
  }
  const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  char detail[160];
  std::snprintf(detail, sizeof detail,
                "%zu parameters, worst relative error %.3g, %.1f s (budget 60 s)", n_checked,
                worst, dt);
  report(1, "full-stack gradients vs central finite differences", worst < 1e-4 && dt < 60.0,
         detail);
}

// ---------------------------------------------------------------- criterion 2

void criterion_coding_rate() {
  RngStream rng(900);
  double worst_rel = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::Index h = 2 + static_cast<Eigen::Index>(rng.below(7));
    const Eigen::Index n = 2 + static_cast<Eigen::Index>(rng.below(7));
    MatrixD Z(h, n);
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index i = 0; i < h; ++i) Z(i, j) = rng.normal();
    const double eps = 0.5 + rng.uniform01();
    const MatrixD M = MatrixD::Identity(h, h) +
                      (static_cast<double>(h) / (static_cast<double>(n) * eps * eps)) * Z *
                          Z.transpose();
    const double dense = 0.5 * std::log(M.determinant());
    const double fast = crate::coding_rate<double>(Z, eps);
    worst_rel = std::max(worst_rel, std::abs(fast - dense) / std::max(1e-12, std::abs(dense)));
  }

  double worst_orth = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    MatrixD Z(6, 9);
    for (int j = 0; j < 9; ++j)
      for (int i = 0; i < 6; ++i) Z(i, j) = rng.normal();
    RngStream qr(1000 + trial);
    const MatrixD Q = crate::detail::random_orthonormal<double>(6, 6, qr);
    worst_orth = std::max(worst_orth, std::abs(crate::coding_rate<double>(MatrixD(Q * Z), 1.0) -
                                               crate::coding_rate<double>(Z, 1.0)));
  }
  char detail[128];
  std::snprintf(detail, sizeof detail, "dense-oracle rel %.3g (<1e-10), |R(QZ)-R(Z)| %.3g (<1e-8)",
                worst_rel, worst_orth);
  report(2, "coding-rate math vs dense determinant + rotation invariance",
         worst_rel < 1e-10 && worst_orth < 1e-8, detail);
}

// ---------------------------------------------------------------- criterion 3

void criterion_ista() {
  RngStream rng(901);
  bool nonneg = true;
  for (int trial = 0; trial < 1000; ++trial) {
    crate::BlockParams<double> p;
    RngStream qr(2000 + trial);
    const int h = 3 + static_cast<int>(rng.below(8));
    p.bases.push_back(crate::detail::random_orthonormal<double>(h, h, qr));
    p.dict = crate::detail::random_orthonormal<double>(h, h, qr);
    p.eta = 0.01 + rng.uniform01();
    p.lambda = rng.uniform01();
    MatrixD Z(h, 4);
    for (int j = 0; j < 4; ++j)
      for (int i = 0; i < h; ++i) Z(i, j) = 6.0 * rng.normal();
    if (crate::ista_step<double>(Z, p).minCoeff() < 0.0) nonneg = false;
  }

  bool soft_exact = true;
  for (int trial = 0; trial < 100; ++trial) {
    crate::BlockParams<double> p;
    p.dict = MatrixD::Identity(5, 5);
    p.bases.push_back(MatrixD::Identity(5, 2));
    p.eta = 0.05 + rng.uniform01();
    p.lambda = rng.uniform01();
    MatrixD Z(5, 3);
    for (int j = 0; j < 3; ++j)
      for (int i = 0; i < 5; ++i) Z(i, j) = 3.0 * rng.normal();
    const MatrixD out = crate::ista_step<double>(Z, p);
    for (int j = 0; j < 3; ++j)
      for (int i = 0; i < 5; ++i)
        if (out(i, j) != std::max(0.0, Z(i, j) - p.eta * p.lambda)) soft_exact = false;
  }
  report(3, "ista non-negativity (1000 fuzzed) + exact soft threshold at D=I",
         nonneg && soft_exact, nonneg ? (soft_exact ? "" : "soft-threshold mismatch")
                                      : "negative output entry");
}

// ---------------------------------------------------------------- criterion 4

void criterion_simulator_safety() {
  const sim::SimConfig base = desk_base();
  long collisions = 0, crossings = 0, speed_violations = 0;
  long vehicles = 0, cvs = 0;

  for (const auto& spec : pipeline::scenario_grid(0.4, 12, 424242)) {
    const sim::SimConfig cfg = pipeline::make_sim_config(spec, base);
    const auto log = sim::run_scenario(cfg, spec.cycles);
    const double stop = cfg.stop_line();

    std::vector<char> counted(4096, 0);
    for (std::size_t si = 0; si + 1 < log.slices.size(); ++si) {
      const auto& now = log.slices[si];
      for (const auto& v : now.vehicles) {
        if (v.speed < 0.0 || v.speed > cfg.free_flow_speed + 1e-12) ++speed_violations;
        if (static_cast<std::size_t>(v.id) < counted.size() && !counted[v.id]) {
          counted[v.id] = 1;
          ++vehicles;
          if (v.is_cv) ++cvs;
        }
      }
      for (std::size_t i = 1; i < now.vehicles.size(); ++i)
        if (now.vehicles[i - 1].rear() - now.vehicles[i].position < 0.0) ++collisions;
      if (cfg.signal.phase_at(now.time) == sim::Phase::kRed) {
        const auto& nxt = log.slices[si + 1];
        for (const auto& v : now.vehicles) {
          if (v.position >= stop) continue;
          bool gone = true;
          for (const auto& w : nxt.vehicles)
            if (w.id == v.id) {
              gone = w.position >= stop;
              break;
            }
          if (gone) ++crossings;
        }
      }
    }
  }
  const double share = static_cast<double>(cvs) / static_cast<double>(vehicles);
  char detail[160];
  std::snprintf(detail, sizeof detail,
                "%ld vehicles, %ld collisions, %ld red crossings, %ld speed violations, CV share "
                "%.3f (target 0.40 +/- 0.03)",
                vehicles, collisions, crossings, speed_violations, share);
  report(4, "9-scenario simulator safety + CV share",
         collisions == 0 && crossings == 0 && speed_violations == 0 && vehicles >= 1000 &&
             std::abs(share - 0.4) <= 0.03,
         detail);
}

// ---------------------------------------------------------------- criterion 5

void criterion_rco_roundtrip() {
  rco::GridConfig g;
  g.link_length = 200.0;
  g.free_flow_speed = 50.0 / 3.6;
  RngStream rng(902);
  long fleets = 0;
  double worst_pos = 0.0;
  bool speeds_exact = true;
  for (int trial = 0; trial < 10000; ++trial) {
    std::vector<sim::VehicleState> fleet;
    double pos = rng.uniform(0.0, 4.0);
    int id = 0;
    while (pos < g.link_length - 1.0) {
      sim::VehicleState v;
      v.id = id++;
      v.position = pos;
      v.speed = static_cast<double>(static_cast<float>(rng.uniform01())) * g.free_flow_speed;
      fleet.push_back(v);
      pos += rng.uniform(1.5, 30.0);
    }
    ++fleets;
    const auto frame = rco::encode(fleet, rco::EncodeSet::kAll, g);
    const auto decoded = rco::decode(frame, g);
    if (decoded.size() != fleet.size()) {
      speeds_exact = false;
      break;
    }
    for (std::size_t i = 0; i < fleet.size(); ++i) {
      worst_pos = std::max(worst_pos, std::abs(decoded[i].position - fleet[i].position));
      if (decoded[i].speed != fleet[i].speed) speeds_exact = false;
    }
  }
  char detail[128];
  std::snprintf(detail, sizeof detail, "%ld fleets, worst position error %.4f m, speeds %s",
                fleets, worst_pos, speeds_exact ? "bit-exact" : "NOT exact");
  report(5, "rco decode(encode) round trip", worst_pos <= 0.5 && speeds_exact, detail);
}

// ---------------------------------------------------------------- criterion 6

int max_matching_exhaustive(const std::vector<double>& est, const std::vector<double>& tru,
                            double threshold) {
  const int n = static_cast<int>(tru.size());
  const int m = static_cast<int>(est.size());
  std::vector<std::vector<int>> memo(m + 1, std::vector<int>(1 << n, -1));
  auto rec = [&](auto&& self, int i, unsigned mask) -> int {
    if (i == m) return 0;
    int& slot = memo[i][mask];
    if (slot >= 0) return slot;
    int best = self(self, i + 1, mask);
    for (int j = 0; j < n; ++j)
      if (!(mask & (1u << j)) && std::abs(est[i] - tru[j]) <= threshold)
        best = std::max(best, 1 + self(self, i + 1, mask | (1u << j)));
    return slot = best;
  };
  return rec(rec, 0, 0u);
}

void criterion_matching_oracle() {
  RngStream rng(903);
  long mismatches = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    const int ne = static_cast<int>(rng.below(7));
    const int nt = static_cast<int>(rng.below(7));
    std::vector<double> est, tru;
    std::vector<sim::VehicleState> est_v, tru_v;
    for (int i = 0; i < ne; ++i) est.push_back(rng.uniform(0.0, 60.0));
    for (int i = 0; i < nt; ++i) tru.push_back(rng.uniform(0.0, 60.0));
    for (double p : est) {
      sim::VehicleState v;
      v.position = p;
      est_v.push_back(v);
    }
    for (double p : tru) {
      sim::VehicleState v;
      v.position = p;
      tru_v.push_back(v);
    }
    const double threshold = rng.uniform(0.5, 10.0);
    const auto m = eval::segment_and_match(est_v, tru_v, {}, threshold);
    if (m.tp() != max_matching_exhaustive(est, tru, threshold)) ++mismatches;
  }

  eval::Counts c;
  c.tp = 953 * 798;
  c.fp = 47 * 798;
  c.fn = 202 * 953;
  const auto r = eval::prf1(c);
  const bool table_ok = std::abs(r.f1 * 100.0 - 86.9) < 0.1;
  char detail[128];
  std::snprintf(detail, sizeof detail,
                "%ld greedy/exhaustive mismatches; P95.3 R79.8 -> F1 %.2f%% (86.9 +/- 0.1)",
                mismatches, r.f1 * 100.0);
  report(6, "matching oracle equivalence + prf1 consistency", mismatches == 0 && table_ok,
         detail);
}

// ------------------------------------------------------- criteria 7 and 8

struct TrendArtifacts {
  std::optional<crate::CrateParams<float>> model_pen07_seed1;
  std::optional<rco::Dataset> test_pen07_seed1;
};

TrendArtifacts criterion_trend() {
  const auto t0 = std::chrono::steady_clock::now();
  const sim::SimConfig base = desk_base();
  TrendArtifacts artifacts;

  int votes_a04 = 0, votes_a07 = 0, votes_b = 0, votes_c = 0;
  const std::vector<std::uint64_t> seeds{1, 2, 3};

  for (std::uint64_t seed : seeds) {
    double f1_by_pen[3] = {0, 0, 0};
    double bl_by_pen[3] = {0, 0, 0};
    double f1_k1 = 0.0;
    const double pens[3] = {0.1, 0.4, 0.7};
    for (int pi = 0; pi < 3; ++pi) {
      std::vector<sim::TrajectoryLog> logs;
      for (const auto& spec : pipeline::scenario_grid(pens[pi], 12, seed))
        logs.push_back(sim::run_scenario(pipeline::make_sim_config(spec, base), spec.cycles));
      auto split = pipeline::build_dataset(logs, 4);
      train::TrainConfig tc = desk_train(seed);
      auto params = crate::init_params<float>(tc.crate_config(split.train.grid), tc.seed);
      train::AdamW<float> opt(tc.adamw());
      train::train(split.train, tc, params, opt);
      f1_by_pen[pi] = eval::evaluate_model(params, split.test, 5.0).prf.f1;
      bl_by_pen[pi] = eval::evaluate_baseline(split.test, 5.0).prf.f1;
      if (pi == 2 && seed == 1) {
        artifacts.model_pen07_seed1 = params;
        artifacts.test_pen07_seed1 = split.test;
      }
      if (pi == 2) {
        // same trajectories, k = 1
        auto split1 = pipeline::build_dataset(logs, 1);
        train::TrainConfig tc1 = desk_train(seed);
        tc1.k = 1;
        auto params1 = crate::init_params<float>(tc1.crate_config(split1.train.grid), tc1.seed);
        train::AdamW<float> opt1(tc1.adamw());
        train::train(split1.train, tc1, params1, opt1);
        f1_k1 = eval::evaluate_model(params1, split1.test, 5.0).prf.f1;
      }
    }
    if (f1_by_pen[1] > bl_by_pen[1]) ++votes_a04;
    if (f1_by_pen[2] > bl_by_pen[2]) ++votes_a07;
    if (f1_by_pen[0] < f1_by_pen[1] && f1_by_pen[1] < f1_by_pen[2]) ++votes_b;
    if (f1_by_pen[2] > f1_k1) ++votes_c;
    std::printf("  seed %llu: F1(0.1)=%.3f F1(0.4)=%.3f F1(0.7)=%.3f | baseline %.3f/%.3f/%.3f "
                "| F1(k=1,0.7)=%.3f\n",
                static_cast<unsigned long long>(seed), f1_by_pen[0], f1_by_pen[1], f1_by_pen[2],
                bl_by_pen[0], bl_by_pen[1], bl_by_pen[2], f1_k1);
    std::fflush(stdout);
  }

  const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool pass = votes_a04 >= 2 && votes_a07 >= 2 && votes_b >= 2 && votes_c >= 2 &&
                    dt < 7200.0;
  char detail[200];
  std::snprintf(detail, sizeof detail,
                "votes/3: beats-baseline@0.4 %d, @0.7 %d, monotone %d, k4>k1 %d; %.0f s "
                "(budget 7200 s)",
                votes_a04, votes_a07, votes_b, votes_c, dt);
  report(7, "desk-scale trend replication (3 seeds, majority)", pass, detail);
  return artifacts;
}

void criterion_coding_profile(TrendArtifacts& artifacts) {
  if (!artifacts.model_pen07_seed1) {
    report(8, "coding-rate profile decreases with encoder depth", false,
           "no trained model available from criterion 7");
    return;
  }
  const auto profile =
      eval::coding_rate_profile(*artifacts.model_pen07_seed1, *artifacts.test_pen07_seed1);
  const double rho = eval::spearman_against_depth(profile);
  std::string values;
  for (double v : profile) {
    char b[32];
    std::snprintf(b, sizeof b, "%.1f ", v);
    values += b;
  }
  char detail[200];
  std::snprintf(detail, sizeof detail, "layer means: %sspearman %.3f (< 0)", values.c_str(), rho);
  report(8, "coding-rate profile decreases with encoder depth", rho < 0.0, detail);
}

// ---------------------------------------------------------------- criterion 9

void criterion_determinism(const std::string& cli, const fs::path& work) {
  if (cli.empty()) {
    report(9, "pipeline determinism through the CLI", false, "--cli not given");
    return;
  }
  auto run_pipeline = [&](const fs::path& dir) {
    fs::create_directories(dir);
    const std::string base = cli + " --preset desk --seed 11 --out-dir ";
    const std::string traj = (dir / "traj").string();
    const std::string ds = (dir / "ds").string();
    const std::string tr = (dir / "tr").string();
    const std::string ev = (dir / "ev").string();
    std::string cmd;
    cmd = base + traj + " simulate --red 30 --vc 0.9 --penetration 0.7 --cycles 6";
    if (std::system((cmd + " > /dev/null").c_str()) != 0) return false;
    cmd = base + ds + " dataset --traj-dir " + traj + " --k 2";
    if (std::system((cmd + " > /dev/null").c_str()) != 0) return false;
    cmd = base + tr + " train --dataset " + ds + " --k 2 --epochs 2 --hidden 16 --batch 64";
    if (std::system((cmd + " > /dev/null").c_str()) != 0) return false;
    cmd = base + ev + " eval --checkpoint " + tr + "/checkpoints/final.ckpt --dataset " + ds +
          " --baseline";
    return std::system((cmd + " > /dev/null").c_str()) == 0;
  };

  const fs::path d1 = work / "det_run1";
  const fs::path d2 = work / "det_run2";
  fs::remove_all(d1);
  fs::remove_all(d2);
  bool ok = run_pipeline(d1) && run_pipeline(d2);
  std::string detail;
  if (ok) {
    const auto h1j = pipeline::fingerprint_file(d1 / "ev" / "report.json");
    const auto h2j = pipeline::fingerprint_file(d2 / "ev" / "report.json");
    const auto h1c = pipeline::fingerprint_file(d1 / "ev" / "report.csv");
    const auto h2c = pipeline::fingerprint_file(d2 / "ev" / "report.csv");
    const auto h1m = pipeline::fingerprint_file(d1 / "ev" / "matches.csv");
    const auto h2m = pipeline::fingerprint_file(d2 / "ev" / "matches.csv");
    ok = h1j == h2j && h1c == h2c && h1m == h2m;
    detail = ok ? "reports bit-identical across two runs" : "report hashes differ";
  } else {
    detail = "CLI pipeline run failed";
  }
  report(9, "pipeline determinism through the CLI", ok, detail);
}

// --------------------------------------------------------------- criterion 10

void criterion_overfit() {
  const sim::SimConfig base = desk_base();
  pipeline::ScenarioSpec spec{30.0, 0.9, 0.7, 12, 7};
  const auto log = sim::run_scenario(pipeline::make_sim_config(spec, base), spec.cycles);
  auto split = pipeline::build_dataset({log}, 4);

  rco::Dataset small = split.train;
  small.windows = split.train.windows.leftCols(8).eval();
  small.targets = split.train.targets.leftCols(8).eval();
  small.sample_scenario.assign(8, 0);
  small.sample_time.assign(8, 0.0);

  train::TrainConfig tc = desk_train(7);
  tc.epochs = 500;
  tc.batch_size = 8;
  auto params = crate::init_params<float>(tc.crate_config(small.grid), tc.seed);
  train::AdamW<float> opt(tc.adamw());
  const auto hist = train::train(small, tc, params, opt);
  const double ratio = hist.back() / hist.front();
  char detail[128];
  std::snprintf(detail, sizeof detail, "loss %.4g -> %.4g, ratio %.4f (< 0.01)", hist.front(),
                hist.back(), ratio);
  report(10, "8-sample overfit sanity (500 epochs)", ratio < 0.01, detail);
}

}  // namespace

int main(int argc, char** argv) {
  std::string cli;
  fs::path work = fs::temp_directory_path() / "cvls_acceptance";
  for (int i = 1; i < argc; ++i) {
    if (std::string(argv[i]) == "--cli" && i + 1 < argc) cli = argv[++i];
    if (std::string(argv[i]) == "--work" && i + 1 < argc) work = argv[++i];
  }
  if (cli.empty())
    if (const char* env = std::getenv("CVLS_CLI")) cli = env;
  fs::create_directories(work);

  criterion_gradients();
  criterion_coding_rate();
  criterion_ista();
  criterion_simulator_safety();
  criterion_rco_roundtrip();
  criterion_matching_oracle();
  criterion_overfit();
  TrendArtifacts artifacts = criterion_trend();
  criterion_coding_profile(artifacts);
  criterion_determinism(cli, work);

  int failed = 0;
  for (const auto& o : g_outcomes)
    if (!o.pass) ++failed;
  std::printf("%d/%zu criteria passed\n", static_cast<int>(g_outcomes.size()) - failed,
              g_outcomes.size());
  return failed == 0 ? 0 : 1;
}
