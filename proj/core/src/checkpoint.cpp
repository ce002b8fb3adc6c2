#include "slt/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>

#include <json.hpp>

#include "slt/error.hpp"

namespace slt {

using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'S', 'L', 'T', 'C'};
constexpr std::uint16_t kVersion = 1;

struct Entry {
  std::string name;
  Shape shape;
  std::span<double> values;  // destination (load) or source (save)
};

// Every tensor a checkpoint carries, in file order.
std::vector<Entry> directory(Model& model, AdamState* adam) {
  std::vector<Entry> out;
  auto params = model.named_parameters();
  for (auto& [name, t] : params) out.push_back({name, t.shape(), t.mutable_data()});
  for (auto& [name, stats] : model.store().buffers()) {
    out.push_back({name + ".running_mean", {stats.running_mean.size()}, stats.running_mean});
    out.push_back({name + ".running_var", {stats.running_var.size()}, stats.running_var});
  }
  if (adam) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      out.push_back({"adam.m." + params[i].first, params[i].second.shape(), adam->first_moment[i]});
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
      out.push_back({"adam.v." + params[i].first, params[i].second.shape(), adam->second_moment[i]});
    }
  }
  return out;
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Model& model, const Adam* optimizer, const CheckpointMeta& meta) {
  // directory() hands out mutable spans; nothing is written through them here.
  auto& m = const_cast<Model&>(model);
  AdamState state;
  if (optimizer) state = optimizer->state();
  const auto entries = directory(m, optimizer ? &state : nullptr);

  json header;
  header["config"] = json::parse(serialize_model_config(meta.config));
  header["gloss_vocab"] = meta.gloss_vocab;
  header["text_vocab"] = meta.text_vocab;
  header["corpus_hash"] = meta.corpus_hash;
  header["corpus_seed"] = meta.corpus_seed;
  header["epoch"] = meta.epoch;
  header["has_optimizer"] = optimizer != nullptr;
  header["adam_step"] = state.step;
  json updates = json::object();
  for (const auto& [name, stats] : model.store().buffers()) updates[name] = stats.updates;
  header["bn_updates"] = updates;
  json dir = json::array();
  for (const auto& e : entries) dir.push_back({{"name", e.name}, {"shape", e.shape}});
  header["tensors"] = dir;
  const std::string text = header.dump();

  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  out.push_back(kVersion & 0xff);
  out.push_back(kVersion >> 8);
  const auto len = static_cast<std::uint32_t>(text.size());
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((len >> (8 * i)) & 0xff));
  out.insert(out.end(), text.begin(), text.end());
  for (const auto& e : entries) {
    for (double v : e.values) {
      const auto bits = std::bit_cast<std::uint64_t>(v);
      for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>((bits >> (8 * i)) & 0xff));
    }
  }
  return out;
}

void save_checkpoint(const Model& model, const Adam* optimizer, const CheckpointMeta& meta, const std::string& path) {
  const auto bytes = encode_checkpoint(model, optimizer, meta);
  // Write-then-rename so an interrupted save never clobbers the previous checkpoint.
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot write checkpoint " + tmp);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

LoadedCheckpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 10) throw FormatError("checkpoint truncated in its preamble", bytes.size());
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw FormatError("bad magic, expected \"SLTC\"", 0);
  const std::uint16_t version = static_cast<std::uint16_t>(bytes[4] | (bytes[5] << 8));
  if (version != kVersion) throw FormatError("unsupported checkpoint version " + std::to_string(version), 4);
  std::uint32_t len = 0;
  for (int i = 0; i < 4; ++i) len |= static_cast<std::uint32_t>(bytes[6 + i]) << (8 * i);
  if (len > bytes.size() - 10) throw FormatError("header length " + std::to_string(len) + " exceeds file", 6);

  json header;
  try {
    header = json::parse(bytes.begin() + 10, bytes.begin() + 10 + len);
  } catch (const json::parse_error& e) {
    throw FormatError("checkpoint header is not valid JSON", 10 + (e.byte > 0 ? e.byte - 1 : 0));
  }

  LoadedCheckpoint out;
  json dir;
  bool has_optimizer = false;
  std::uint64_t adam_step = 0;
  json updates;
  try {
    out.meta.config = parse_model_config(header.at("config").dump());
    out.meta.gloss_vocab = header.at("gloss_vocab").get<std::size_t>();
    out.meta.text_vocab = header.at("text_vocab").get<std::size_t>();
    out.meta.corpus_hash = header.at("corpus_hash").get<std::string>();
    out.meta.corpus_seed = header.at("corpus_seed").get<std::uint64_t>();
    out.meta.epoch = header.at("epoch").get<std::size_t>();
    has_optimizer = header.at("has_optimizer").get<bool>();
    adam_step = header.at("adam_step").get<std::uint64_t>();
    updates = header.at("bn_updates");
    dir = header.at("tensors");
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint header: ") + e.what(), 10);
  }
  if (out.meta.gloss_vocab < 2 || out.meta.text_vocab < 5) throw FormatError("checkpoint header: implausible vocabulary sizes", 10);

  out.model = std::make_unique<Model>(out.meta.config, out.meta.gloss_vocab, out.meta.text_vocab);
  AdamState state;
  if (has_optimizer) {
    state.step = adam_step;
    for (const auto& [name, t] : out.model->named_parameters()) {
      state.first_moment.emplace_back(t.numel(), 0.0);
      state.second_moment.emplace_back(t.numel(), 0.0);
    }
  }
  auto entries = directory(*out.model, has_optimizer ? &state : nullptr);
  if (!dir.is_array() || dir.size() != entries.size()) {
    throw ConfigError("checkpoint lists " + std::to_string(dir.is_array() ? dir.size() : 0) +
                      " tensors; its config implies " + std::to_string(entries.size()));
  }
  std::size_t expected = 0;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    Shape shape;
    std::string name;
    try {
      name = dir[i].at("name").get<std::string>();
      shape = dir[i].at("shape").get<Shape>();
    } catch (const json::exception& e) {
      throw FormatError(std::string("checkpoint tensor directory: ") + e.what(), 10);
    }
    if (name != entries[i].name || shape != entries[i].shape) {
      throw ConfigError("checkpoint tensor " + std::to_string(i) + " is " + name + " " + shape_str(shape) +
                        ", expected " + entries[i].name + " " + shape_str(entries[i].shape));
    }
    expected += entries[i].values.size();
  }
  const std::size_t payload_at = 10 + len;
  const std::size_t payload = bytes.size() - payload_at;
  if (payload != expected * 8) {
    throw FormatError("checkpoint payload has " + std::to_string(payload) + " bytes, expected " +
                          std::to_string(expected * 8),
                      payload < expected * 8 ? bytes.size() : payload_at + expected * 8);
  }
  std::size_t pos = payload_at;
  for (auto& e : entries) {
    for (auto& v : e.values) {
      std::uint64_t bits = 0;
      for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes[pos + i]) << (8 * i);
      v = std::bit_cast<double>(bits);
      pos += 8;
    }
  }
  for (auto& [name, stats] : out.model->store().buffers()) {
    if (!updates.contains(name) || !updates[name].is_number_unsigned()) {
      throw FormatError("checkpoint header: missing bn_updates for " + name, 10);
    }
    stats.updates = updates[name].get<std::size_t>();
  }
  if (has_optimizer) out.optimizer = std::move(state);
  return out;
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint " + path);
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace slt
