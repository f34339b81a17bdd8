#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "cvls/crate/network.hpp"

namespace cvls::crate {

inline nlohmann::json to_json(const CrateConfig& c) {
  return nlohmann::json{{"lanes", c.lanes},
                        {"cells", c.cells},
                        {"k", c.k},
                        {"patch", c.patch},
                        {"hidden", c.hidden},
                        {"heads", c.heads},
                        {"encoder_blocks", c.encoder_blocks},
                        {"decoder_blocks", c.decoder_blocks},
                        {"d_e", c.d_e},
                        {"kappa", c.kappa},
                        {"eta", c.eta},
                        {"lambda", c.lambda},
                        {"epsilon", c.epsilon},
                        {"ista_variant",
                         c.ista_variant == IstaVariant::kPrinted ? "printed" : "residual"}};
}

inline CrateConfig crate_config_from_json(const nlohmann::json& j) {
  CrateConfig c;
  c.lanes = j.at("lanes");
  c.cells = j.at("cells");
  c.k = j.at("k");
  c.patch = j.at("patch");
  c.hidden = j.at("hidden");
  c.heads = j.at("heads");
  c.encoder_blocks = j.at("encoder_blocks");
  c.decoder_blocks = j.at("decoder_blocks");
  c.d_e = j.at("d_e");
  c.kappa = j.at("kappa");
  c.eta = j.at("eta");
  c.lambda = j.at("lambda");
  c.epsilon = j.at("epsilon");
  c.ista_variant =
      j.at("ista_variant") == "printed" ? IstaVariant::kPrinted : IstaVariant::kResidual;
  return c;
}

namespace ckpt {

inline constexpr char kMagic[8] = {'C', 'V', 'L', 'S', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kVersion = 1;

inline void write_f32(std::ofstream& out, const MatrixF& m) {
  // column-major storage, written as-is; shape recorded in the header table
  out.write(reinterpret_cast<const char*>(m.data()),
            static_cast<std::streamsize>(sizeof(float) * m.size()));
}

inline MatrixF read_f32(std::ifstream& in, Eigen::Index rows, Eigen::Index cols) {
  MatrixF m(rows, cols);
  in.read(reinterpret_cast<char*>(m.data()),
          static_cast<std::streamsize>(sizeof(float) * m.size()));
  if (!in) throw DataError("checkpoint truncated");
  return m;
}

}  // namespace ckpt

/// Versioned container: magic, version, JSON header (architecture + tensor
/// shape table + caller metadata), then raw float32 tensors in declaration
/// order. Bit-exact across a save/load/save round trip.
template <typename Scalar>
void save_checkpoint(const std::filesystem::path& path, CrateParams<Scalar>& params,
                     const nlohmann::json& meta = nlohmann::json::object(),
                     const std::vector<std::pair<std::string, MatrixF>>& extra = {}) {
  nlohmann::json header;
  header["arch"] = to_json(params.cfg);
  header["meta"] = meta;
  nlohmann::json table = nlohmann::json::array();
  for (auto& [name, t] : params.tensors())
    table.push_back({{"name", name}, {"rows", t->rows()}, {"cols", t->cols()}});
  for (const auto& [name, t] : extra)
    table.push_back({{"name", name}, {"rows", t.rows()}, {"cols", t.cols()}, {"extra", true}});
  header["tensors"] = table;

  const std::string hs = header.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open checkpoint " + path.string() + " for writing");
  out.write(ckpt::kMagic, sizeof ckpt::kMagic);
  const std::uint32_t version = ckpt::kVersion;
  out.write(reinterpret_cast<const char*>(&version), sizeof version);
  const std::uint64_t len = hs.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof len);
  out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  for (auto& [name, t] : params.tensors()) ckpt::write_f32(out, t->template cast<float>());
  for (const auto& [name, t] : extra) ckpt::write_f32(out, t);
  if (!out) throw DataError("checkpoint write failed: " + path.string());
}

template <typename Scalar>
struct LoadedCheckpoint {
  CrateParams<Scalar> params;
  nlohmann::json meta;
  std::map<std::string, MatrixF> extra;
};

template <typename Scalar>
LoadedCheckpoint<Scalar> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, ckpt::kMagic, sizeof magic) != 0)
    throw DataError("not a checkpoint file: " + path.string());
  std::uint32_t version = 0;
  in.read(reinterpret_cast<char*>(&version), sizeof version);
  if (version != ckpt::kVersion)
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof len);
  std::string hs(len, '\0');
  in.read(hs.data(), static_cast<std::streamsize>(len));
  if (!in) throw DataError("checkpoint header truncated");
  nlohmann::json header = nlohmann::json::parse(hs);

  LoadedCheckpoint<Scalar> loaded;
  loaded.meta = header.at("meta");
  const CrateConfig cfg = crate_config_from_json(header.at("arch"));
  loaded.params = init_params<Scalar>(cfg, 0);  // shapes only; overwritten below

  auto mine = loaded.params.tensors();
  std::size_t next = 0;
  for (const auto& entry : header.at("tensors")) {
    const std::string name = entry.at("name");
    const Eigen::Index rows = entry.at("rows");
    const Eigen::Index cols = entry.at("cols");
    MatrixF t = ckpt::read_f32(in, rows, cols);
    if (entry.contains("extra")) {
      loaded.extra[name] = std::move(t);
    } else {
      require(next < mine.size() && mine[next].first == name &&
                  mine[next].second->rows() == rows && mine[next].second->cols() == cols,
              "checkpoint tensor table does not match architecture");
      *mine[next].second = t.cast<Scalar>();
      ++next;
    }
  }
  require(next == mine.size(), "checkpoint missing parameter tensors");
  return loaded;
}

}  // namespace cvls::crate
