#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "slt/adam.hpp"
#include "slt/model.hpp"

namespace slt {

struct CheckpointMeta {
  ModelConfig config;
  std::size_t gloss_vocab = 0;
  std::size_t text_vocab = 0;
  std::string corpus_hash;
  std::uint64_t corpus_seed = 0;
  std::size_t epoch = 0;  // completed epochs
};

// Binary layout, little-endian:
//   "SLTC" | u16 version | u32 header length | JSON header | f64 payload
// The header holds the meta fields and a directory of (name, shape) entries
// whose values follow in order: parameters, batch-norm running statistics,
// then Adam moments when an optimizer is saved.
std::vector<std::uint8_t> encode_checkpoint(const Model& model, const Adam* optimizer, const CheckpointMeta& meta);
void save_checkpoint(const Model& model, const Adam* optimizer, const CheckpointMeta& meta, const std::string& path);

struct LoadedCheckpoint {
  CheckpointMeta meta;
  std::unique_ptr<Model> model;
  std::optional<AdamState> optimizer;
};

// Throws FormatError on malformed bytes and ConfigError when the stored
// tensors do not match the architecture the stored config describes.
LoadedCheckpoint decode_checkpoint(std::span<const std::uint8_t> bytes);
LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace slt
