#include "spotlight/train/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

namespace spotlight::train {

namespace {

constexpr char kMagic[8] = {'S', 'P', 'O', 'T', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw CheckpointError("checkpoint truncated");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void save_checkpoint(const std::string& path, const CheckpointMeta& meta,
                     const model::ParamStore<float>& params) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw CheckpointError("cannot open '" + path + "' for writing");

  std::string header = meta.config.serialize();
  for (const auto& [k, v] : meta.extra) header += k + "=" + v + "\n";

  os.write(kMagic, 8);
  write_u32(os, kVersion);
  write_u32(os, static_cast<std::uint32_t>(header.size()));
  os.write(header.data(), static_cast<std::streamsize>(header.size()));

  const auto named = params.named();
  write_u32(os, static_cast<std::uint32_t>(named.size()));
  for (const auto& p : named) {
    write_u32(os, static_cast<std::uint32_t>(p.name.size()));
    os.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    write_u32(os, static_cast<std::uint32_t>(p.tensor.shape.size()));
    for (int d : p.tensor.shape) write_u32(os, static_cast<std::uint32_t>(d));
    static_assert(sizeof(float) == 4);
    os.write(reinterpret_cast<const char*>(p.tensor.ptr()),
             static_cast<std::streamsize>(p.tensor.numel() * sizeof(float)));
  }
  if (!os) throw CheckpointError("write to '" + path + "' failed");
}

CheckpointMeta load_checkpoint(const std::string& path, model::ParamStore<float>& params,
                               std::uint64_t expected_vocab_hash) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointError("cannot open '" + path + "'");
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kMagic, 8) != 0) {
    throw CheckpointError("'" + path + "' is not a checkpoint file");
  }
  const std::uint32_t version = read_u32(is);
  if (version != kVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  }
  const std::uint32_t header_len = read_u32(is);
  std::string header(header_len, '\0');
  is.read(header.data(), header_len);
  if (!is) throw CheckpointError("checkpoint truncated");

  CheckpointMeta meta;
  meta.config = model::SpotlightConfig::deserialize(header);
  // Lines the config parser does not own go to `extra`.
  {
    std::istringstream hs(header);
    std::string line;
    const std::string cfg_text = meta.config.serialize();
    while (std::getline(hs, line)) {
      if (line.empty()) continue;
      const auto eq = line.find('=');
      const std::string key = line.substr(0, eq);
      if (cfg_text.find(key + "=") == std::string::npos) {
        meta.extra[key] = line.substr(eq + 1);
      }
    }
  }
  if (expected_vocab_hash != 0) {
    auto it = meta.extra.find("vocab_hash");
    if (it == meta.extra.end() || std::stoull(it->second) != expected_vocab_hash) {
      throw CheckpointError("checkpoint vocabulary does not match the loaded vocabulary");
    }
  }

  const std::uint32_t n_tensors = read_u32(is);
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    const std::uint32_t name_len = read_u32(is);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    const std::uint32_t ndim = read_u32(is);
    std::vector<int> shape(ndim);
    for (auto& d : shape) d = static_cast<int>(read_u32(is));
    auto& t = params.add(name, shape, model::Init::Zero);
    is.read(reinterpret_cast<char*>(t.mut_ptr()),
            static_cast<std::streamsize>(t.numel() * sizeof(float)));
    if (!is) throw CheckpointError("checkpoint truncated in tensor '" + name + "'");
  }
  return meta;
}

}  // namespace spotlight::train
