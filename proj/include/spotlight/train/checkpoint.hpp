#pragma once

// Binary checkpoint format, little-endian:
//   magic "SPOTCKPT", u32 version, u32 header_len, header bytes,
//   u32 n_tensors, then per tensor:
//     u32 name_len, name bytes, u32 ndim, u32 dims..., float32 data.
// The header is the serialized model config plus extra key=value metadata
// lines (step, vocab_hash, ...). Loading verifies the vocabulary hash when
// the caller provides one.

#include <cstdint>
#include <map>
#include <string>

#include "spotlight/model/config.hpp"
#include "spotlight/model/params.hpp"

namespace spotlight::train {

struct CheckpointError : std::runtime_error {
  explicit CheckpointError(const std::string& msg) : std::runtime_error(msg) {}
};

struct CheckpointMeta {
  model::SpotlightConfig config;
  std::map<std::string, std::string> extra;  // step, vocab_hash, ...
};

void save_checkpoint(const std::string& path, const CheckpointMeta& meta,
                     const model::ParamStore<float>& params);

// Populates `params` (which may be empty) and returns the metadata. When
// `expected_vocab_hash` is non-zero it must match the stored vocab_hash.
CheckpointMeta load_checkpoint(const std::string& path, model::ParamStore<float>& params,
                               std::uint64_t expected_vocab_hash = 0);

}  // namespace spotlight::train
