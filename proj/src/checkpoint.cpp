#include "orsp/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include "orsp/serde.hpp"

namespace orsp {

using json = nlohmann::json;

namespace {

constexpr char kMagic[8] = {'O', 'R', 'S', 'P', 'C', 'K', '0', '1'};

void write_matrix(std::ofstream& out, const Matrix& m) {
  // row-major, independent of Eigen's storage order
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      const double v = m(r, c);
      out.write(reinterpret_cast<const char*>(&v), sizeof(double));
    }
}

void read_matrix(std::ifstream& in, Matrix& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      double v = 0.0;
      if (!in.read(reinterpret_cast<char*>(&v), sizeof(double)))
        throw std::runtime_error("checkpoint: truncated tensor data");
      m(r, c) = v;
    }
}

}  // namespace

void save_checkpoint(const ParamStore& params, const CheckpointMeta& meta,
                     const std::string& path) {
  json header;
  header["config"] = meta.config;
  header["step"] = meta.step;
  header["adam_t"] = meta.adam_t;
  header["rng"] = meta.rng;
  header["has_opt"] = meta.has_opt;
  json tensors = json::array();
  for (const std::string& name : params.names()) {
    const Matrix& v = params.value(name);
    tensors.push_back({{"name", name}, {"rows", v.rows()}, {"cols", v.cols()}});
  }
  header["tensors"] = tensors;
  const std::string header_str = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
  out.write(kMagic, sizeof(kMagic));
  const std::uint64_t header_len = header_str.size();
  out.write(reinterpret_cast<const char*>(&header_len), sizeof(header_len));
  out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
  for (const std::string& name : params.names())
    write_matrix(out, params.value(name));
  if (meta.has_opt) {
    for (const std::string& name : params.names())
      write_matrix(out, params.opt_m(name));
    for (const std::string& name : params.names())
      write_matrix(out, params.opt_v(name));
  }
  if (!out) throw std::runtime_error("save_checkpoint: write failed: " + path);
}

std::pair<ParamStore, CheckpointMeta> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
  char magic[8];
  if (!in.read(magic, sizeof(magic)) ||
      std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("load_checkpoint: bad magic (not a checkpoint?)");
  std::uint64_t header_len = 0;
  if (!in.read(reinterpret_cast<char*>(&header_len), sizeof(header_len)))
    throw std::runtime_error("load_checkpoint: truncated header length");
  std::string header_str(header_len, '\0');
  if (!in.read(header_str.data(), static_cast<std::streamsize>(header_len)))
    throw std::runtime_error("load_checkpoint: truncated header");

  json header = json::parse(header_str);
  CheckpointMeta meta;
  meta.config = header.at("config").get<ModelConfig>();
  meta.step = header.at("step").get<long>();
  meta.adam_t = header.at("adam_t").get<long>();
  meta.rng = header.at("rng").get<Rng::State>();
  meta.has_opt = header.at("has_opt").get<bool>();

  ParamStore params;
  for (const auto& tensor : header.at("tensors")) {
    const std::string name = tensor.at("name").get<std::string>();
    const Eigen::Index rows = tensor.at("rows").get<Eigen::Index>();
    const Eigen::Index cols = tensor.at("cols").get<Eigen::Index>();
    if (rows < 0 || cols < 0)
      throw std::runtime_error("load_checkpoint: bad shape for " + name);
    params.add(name, Matrix::Zero(rows, cols));
  }
  for (const std::string& name : params.names())
    read_matrix(in, params.value(name));
  if (meta.has_opt) {
    for (const std::string& name : params.names())
      read_matrix(in, params.opt_m(name));
    for (const std::string& name : params.names())
      read_matrix(in, params.opt_v(name));
  }
  return {std::move(params), meta};
}

namespace {

std::string first_config_difference(const ModelConfig& got,
                                    const ModelConfig& want) {
  json a = got, b = want;
  for (auto it = b.begin(); it != b.end(); ++it) {
    if (a.at(it.key()) != it.value()) {
      std::ostringstream os;
      os << it.key() << " " << a.at(it.key()) << " != " << it.value();
      return os.str();
    }
  }
  return "unknown field";
}

}  // namespace

std::pair<ParamStore, CheckpointMeta> load_checkpoint(
    const std::string& path, const ModelConfig& expected) {
  auto loaded = load_checkpoint(path);
  if (!(loaded.second.config == expected))
    throw ConfigMismatchError(
        "checkpoint config mismatch: " +
        first_config_difference(loaded.second.config, expected));
  return loaded;
}

}  // namespace orsp
