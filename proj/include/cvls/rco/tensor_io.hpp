#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cvls/rco/grid.hpp"

namespace cvls::rco {

/// Flat binary of 32-bit floats with a JSON sidecar describing the shape.
/// Layout is row-major [lane][cell][channel]; a column-major Eigen matrix
/// whose columns are samples and whose rows follow that order writes
/// one sample after another.
inline void write_tensor(const std::filesystem::path& path, const MatrixF& m,
                         const nlohmann::json& sidecar_extra = {}) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open tensor file " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(m.data()),
            static_cast<std::streamsize>(sizeof(float) * m.size()));
  if (!out) throw DataError("tensor write failed: " + path.string());

  nlohmann::json sidecar{{"dtype", "float32"},
                         {"rows", m.rows()},
                         {"cols", m.cols()},
                         {"order", "column-major"}};
  if (!sidecar_extra.is_null())
    for (auto& [key, val] : sidecar_extra.items()) sidecar[key] = val;
  std::filesystem::path sp = path;
  sp += ".json";
  std::ofstream sout(sp, std::ios::binary);
  sout << sidecar.dump(2) << "\n";
}

inline MatrixF read_tensor(const std::filesystem::path& path, nlohmann::json* sidecar = nullptr) {
  std::filesystem::path sp = path;
  sp += ".json";
  std::ifstream sin(sp);
  if (!sin) throw DataError("missing tensor sidecar " + sp.string());
  nlohmann::json j = nlohmann::json::parse(sin);
  const Eigen::Index rows = j.at("rows");
  const Eigen::Index cols = j.at("cols");
  MatrixF m(rows, cols);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open tensor file " + path.string());
  in.read(reinterpret_cast<char*>(m.data()),
          static_cast<std::streamsize>(sizeof(float) * m.size()));
  if (!in) throw DataError("tensor file truncated: " + path.string());
  if (sidecar) *sidecar = j;
  return m;
}

/// One scenario's identity inside a dataset.
struct ScenarioInfo {
  double red = 30.0;
  double vc_ratio = 0.6;
  double penetration = 0.4;
  std::uint64_t seed = 1;
  std::string name;
};

/// Per-second (window, target) samples with their provenance. Columns of
/// `windows` are flattened k-step CV windows; columns of `targets` are
/// flattened [cell][channel] target frames.
struct Dataset {
  MatrixF windows;  // [lanes*cells*2k x S]
  MatrixF targets;  // [lanes*cells*2  x S]
  GridConfig grid;
  int k = 4;
  std::vector<int> sample_scenario;  // size S
  std::vector<double> sample_time;   // size S
  std::vector<ScenarioInfo> scenarios;

  Eigen::Index size() const { return windows.cols(); }

  /// Reconstructs the target frame of one sample.
  RCOFrame target_frame(Eigen::Index s) const {
    RCOFrame f = RCOFrame::empty(grid);
    const int cells = grid.cells();
    for (int l = 0; l < grid.lanes; ++l)
      for (int c = 0; c < cells; ++c) {
        f.occ(l, c) = targets((l * cells + c) * 2 + 0, s);
        f.spd(l, c) = targets((l * cells + c) * 2 + 1, s);
      }
    return f;
  }

  /// Reconstructs the newest CV frame of one sample's window.
  RCOFrame input_frame(Eigen::Index s) const {
    RCOFrame f = RCOFrame::empty(grid);
    const int cells = grid.cells();
    for (int l = 0; l < grid.lanes; ++l)
      for (int c = 0; c < cells; ++c) {
        f.occ(l, c) = windows((l * cells + c) * 2 * k + 0, s);
        f.spd(l, c) = windows((l * cells + c) * 2 * k + 1, s);
      }
    return f;
  }
};

inline nlohmann::json to_json(const ScenarioInfo& s) {
  return nlohmann::json{{"red", s.red},
                        {"vc_ratio", s.vc_ratio},
                        {"penetration", s.penetration},
                        {"seed", s.seed},
                        {"name", s.name}};
}

inline ScenarioInfo scenario_from_json(const nlohmann::json& j) {
  ScenarioInfo s;
  s.red = j.at("red");
  s.vc_ratio = j.at("vc_ratio");
  s.penetration = j.at("penetration");
  s.seed = j.at("seed");
  s.name = j.at("name");
  return s;
}

inline void save_dataset(const Dataset& d, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json meta{{"lanes", d.grid.lanes},
                      {"cells", d.grid.cells()},
                      {"cell_length", d.grid.cell_length},
                      {"link_length", d.grid.link_length},
                      {"free_flow_speed", d.grid.free_flow_speed},
                      {"k", d.k},
                      {"samples", d.size()}};
  write_tensor(dir / "windows.bin", d.windows, meta);
  write_tensor(dir / "targets.bin", d.targets, meta);

  nlohmann::json scen = nlohmann::json::array();
  for (const auto& s : d.scenarios) scen.push_back(to_json(s));
  nlohmann::json index{{"meta", meta},
                       {"scenarios", scen},
                       {"sample_scenario", d.sample_scenario},
                       {"sample_time", d.sample_time}};
  std::ofstream out(dir / "meta.json", std::ios::binary);
  out << index.dump(2) << "\n";
}

inline Dataset load_dataset(const std::filesystem::path& dir) {
  std::ifstream in(dir / "meta.json");
  if (!in) throw DataError("missing dataset meta " + (dir / "meta.json").string());
  nlohmann::json index = nlohmann::json::parse(in);
  const nlohmann::json& meta = index.at("meta");

  Dataset d;
  d.grid.lanes = meta.at("lanes");
  d.grid.cell_length = meta.at("cell_length");
  d.grid.link_length = meta.at("link_length");
  d.grid.free_flow_speed = meta.at("free_flow_speed");
  d.k = meta.at("k");
  d.windows = read_tensor(dir / "windows.bin");
  d.targets = read_tensor(dir / "targets.bin");
  for (const auto& j : index.at("scenarios")) d.scenarios.push_back(scenario_from_json(j));
  d.sample_scenario = index.at("sample_scenario").get<std::vector<int>>();
  d.sample_time = index.at("sample_time").get<std::vector<double>>();
  require(d.windows.cols() == d.targets.cols() &&
              d.windows.cols() == Eigen::Index(d.sample_scenario.size()),
          "dataset shards and index disagree on sample count");
  return d;
}

/// Windows from k stacked frames: [lane][cell][channel] with channels
/// (occ(t), spd(t), occ(t-1), spd(t-1), ...). Targets: (occ(t), spd(t)).
inline void append_sample(Dataset& d, Eigen::Index col, const RCOWindow& w,
                          const RCOFrame& target) {
  d.windows.col(col) = w.flatten();
  const int cells = d.grid.cells();
  for (int l = 0; l < d.grid.lanes; ++l)
    for (int c = 0; c < cells; ++c) {
      d.targets((l * cells + c) * 2 + 0, col) = target.occ(l, c);
      d.targets((l * cells + c) * 2 + 1, col) = target.spd(l, c);
    }
}

}  // namespace cvls::rco
