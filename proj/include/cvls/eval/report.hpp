#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cvls/eval/evaluator.hpp"

namespace cvls::eval {

/// Full evaluation output: one entry per method, plus optional per-layer
/// coding rates. The notes record the matching conventions in force.
struct EvalReport {
  double threshold = 5.0;
  std::vector<std::string> notes;
  std::vector<MethodReport> methods;
  std::vector<double> coding_rates;  // encoder layers, depth order; may be empty
  std::vector<rco::ScenarioInfo> scenarios;
};

inline nlohmann::json to_json(const MethodReport& m,
                              const std::vector<rco::ScenarioInfo>& scenarios) {
  nlohmann::json per = nlohmann::json::array();
  for (const auto& s : m.per_scenario) {
    nlohmann::json js{{"scenario", s.scenario},
                      {"tp", s.counts.tp},
                      {"fp", s.counts.fp},
                      {"fn", s.counts.fn},
                      {"precision", s.prf.precision},
                      {"recall", s.prf.recall},
                      {"f1", s.prf.f1},
                      {"degenerate", s.prf.degenerate}};
    if (s.rmse) js["rmse"] = *s.rmse;
    if (s.scenario >= 0 && static_cast<std::size_t>(s.scenario) < scenarios.size())
      js["info"] = rco::to_json(scenarios[static_cast<std::size_t>(s.scenario)]);
    per.push_back(js);
  }
  nlohmann::json j{{"method", m.name},
                   {"tp", m.counts.tp},
                   {"fp", m.counts.fp},
                   {"fn", m.counts.fn},
                   {"precision", m.prf.precision},
                   {"recall", m.prf.recall},
                   {"f1", m.prf.f1},
                   {"degenerate", m.prf.degenerate},
                   {"per_scenario", per}};
  if (m.rmse) j["rmse"] = *m.rmse;
  return j;
}

inline nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json methods = nlohmann::json::array();
  for (const auto& m : r.methods) methods.push_back(to_json(m, r.scenarios));
  nlohmann::json j{{"threshold_m", r.threshold},
                   {"notes", r.notes},
                   {"methods", methods},
                   {"tool_version", kToolVersion}};
  if (!r.coding_rates.empty()) j["encoder_coding_rates"] = r.coding_rates;
  return j;
}

inline void write_report_json(const EvalReport& r, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write report " + path.string());
  out << to_json(r).dump(2) << "\n";
}

/// CSV with one row per (scenario, method) and a mean row per method:
/// penetration, vc_ratio, red, method, precision, recall, f1, rmse.
inline void write_report_csv(const EvalReport& r, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write report " + path.string());
  out << "penetration,vc_ratio,red_s,method,precision,recall,f1,rmse_mps\n";
  char line[256];
  auto row = [&](const std::string& pen, const std::string& vc, const std::string& red,
                 const std::string& method, const Prf1& p, const std::optional<double>& rmse) {
    std::snprintf(line, sizeof line, "%s,%s,%s,%s,%.6f,%.6f,%.6f,%s\n", pen.c_str(),
                  vc.c_str(), red.c_str(), method.c_str(), p.precision, p.recall, p.f1,
                  rmse ? std::to_string(*rmse).c_str() : "");
    out << line;
  };
  auto num = [](double v) {
    char b[32];
    std::snprintf(b, sizeof b, "%g", v);
    return std::string(b);
  };
  for (const auto& m : r.methods) {
    for (const auto& s : m.per_scenario) {
      if (static_cast<std::size_t>(s.scenario) >= r.scenarios.size()) continue;
      const auto& info = r.scenarios[static_cast<std::size_t>(s.scenario)];
      row(num(info.penetration), num(info.vc_ratio), num(info.red), m.name, s.prf, s.rmse);
    }
    row("all", "all", "all", m.name, m.prf, m.rmse);
  }
}

inline void write_matches_csv(const std::vector<SampleMatches>& dump,
                              const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write matches " + path.string());
  out << "sample,scenario,kind,est_pos_m,est_speed_mps,truth_pos_m,truth_speed_mps,distance_m\n";
  char line[256];
  for (const auto& sm : dump) {
    for (const auto& p : sm.match.pairs) {
      std::snprintf(line, sizeof line, "%lld,%d,tp,%.6f,%.6f,%.6f,%.6f,%.6f\n",
                    static_cast<long long>(sm.sample), sm.scenario, p.estimate.position,
                    p.estimate.speed, p.truth.position, p.truth.speed, p.distance);
      out << line;
    }
    for (const auto& v : sm.match.unmatched_estimates) {
      std::snprintf(line, sizeof line, "%lld,%d,fp,%.6f,%.6f,,,\n",
                    static_cast<long long>(sm.sample), sm.scenario, v.position, v.speed);
      out << line;
    }
    for (const auto& v : sm.match.unmatched_truths) {
      std::snprintf(line, sizeof line, "%lld,%d,fn,,,%.6f,%.6f,\n",
                    static_cast<long long>(sm.sample), sm.scenario, v.position, v.speed);
      out << line;
    }
  }
}

}  // namespace cvls::eval
