#include "bppo/checkpoint.hpp"

#include <bit>
#include <fstream>

#include <json.hpp>

#include "bppo/error.hpp"
#include "config_io.hpp"

namespace bppo {

namespace {

constexpr const char* kMagic = "bppolab-checkpoint 1";

void write_f64_le(std::ostream& os, double d) {
  const uint64_t v = std::bit_cast<uint64_t>(d);
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  os.write(b, 8);
}

double read_f64_le(std::istream& is) {
  char b[8];
  is.read(b, 8);
  if (!is) throw IoError("checkpoint: truncated payload");
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    v |= static_cast<uint64_t>(static_cast<unsigned char>(b[i])) << (8 * i);
  }
  return std::bit_cast<double>(v);
}

}  // namespace

void save_checkpoint(const PolicyParams& params, const std::filesystem::path& path) {
  const PolicyLayout lay = make_layout(params.config);
  nlohmann::json dir = nlohmann::json::array();
  int64_t offset = 0;
  for (size_t i = 0; i < lay.entries.size(); ++i) {
    const auto& e = lay.entries[i];
    dir.push_back({{"name", e.name}, {"shape", e.shape}, {"offset", offset}});
    offset += params.tensors[i].numel() * 8;
  }
  nlohmann::json header = {
      {"config", policy_config_to_json(params.config)},
      {"format_version", 1},
      {"tensors", dir},
  };
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write checkpoint: " + path.string());
  os << kMagic << "\n" << header.dump() << "\n";
  for (const Tensor& t : params.tensors) {
    for (double d : t.data) write_f64_le(os, d);
  }
  if (!os) throw IoError("checkpoint write failed: " + path.string());
}

PolicyParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read checkpoint: " + path.string());
  std::string magic, header_line;
  if (!std::getline(is, magic) || magic != kMagic) {
    throw IoError("not a checkpoint file: " + path.string());
  }
  if (!std::getline(is, header_line)) throw IoError("checkpoint: missing header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_line);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("checkpoint: bad header: ") + e.what());
  }
  PolicyParams params;
  params.config = policy_config_from_json(header.at("config"));
  const PolicyLayout lay = make_layout(params.config);
  const auto& dir = header.at("tensors");
  if (dir.size() != lay.entries.size()) {
    throw IoError("checkpoint: tensor directory does not match config");
  }
  for (size_t i = 0; i < lay.entries.size(); ++i) {
    const auto& e = lay.entries[i];
    if (dir[i].at("name").get<std::string>() != e.name ||
        dir[i].at("shape").get<std::vector<int64_t>>() != e.shape) {
      throw IoError("checkpoint: tensor directory mismatch at '" + e.name + "'");
    }
  }
  params.tensors.reserve(lay.entries.size());
  for (const auto& e : lay.entries) {
    Tensor t = Tensor::zeros(e.shape);
    for (double& d : t.data) d = read_f64_le(is);
    params.tensors.push_back(std::move(t));
  }
  return params;
}

}  // namespace bppo
