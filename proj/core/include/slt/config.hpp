#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace slt {

enum class InputKind : std::uint8_t { kRgb = 0, kFlow = 1 };

std::string to_string(InputKind kind);
InputKind parse_input_kind(const std::string& text);
std::size_t input_channels(InputKind kind);

struct BackboneConfig {
  std::size_t input_size = 32;                 // square frames
  std::vector<std::size_t> channels{8, 16, 16};  // output channels per stage
  std::size_t kernel = 4;
  std::size_t stride = 2;
  std::size_t padding = 1;

  // Output grid extent after all stages; throws ConfigError on non-integral extents.
  std::size_t output_extent() const;
  std::size_t output_channels() const { return channels.back(); }
  bool operator==(const BackboneConfig&) const = default;
};

struct OptimizerConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double max_grad_norm = 0.0;  // 0 disables clipping
  bool operator==(const OptimizerConfig&) const = default;
};

// Every hyperparameter and ablation switch of one training run.
struct ModelConfig {
  InputKind input_kind = InputKind::kFlow;
  bool use_pe2d = true;
  bool use_attn2d = true;
  bool use_ffn2d = true;
  bool use_glosses = true;
  BackboneConfig backbone;
  std::size_t decoder_heads = 4;
  std::size_t decoder_layers = 1;
  std::size_t decoder_ff = 512;
  std::size_t max_decode_len = 16;
  std::size_t epochs = 10;
  std::size_t batch_size = 1;
  std::uint64_t seed = 1;
  double lambda_ctc = 1.0;
  OptimizerConfig optimizer;

  std::size_t d_model() const;
  // Throws ConfigError describing the first invalid field or combination.
  void validate() const;
  bool ctc_enabled() const { return use_glosses && lambda_ctc > 0.0; }
  bool operator==(const ModelConfig&) const = default;
};

// Synthetic gesture corpus parameters.
struct CorpusConfig {
  std::size_t affirmative = 24;
  std::size_t negative = 4;
  std::size_t interrogative = 11;
  std::size_t repetitions = 3;
  std::size_t frames_per_gesture = 4;
  std::size_t image_size = 32;
  double speed_jitter = 0.2;
  std::size_t flow_block = 4;
  std::size_t flow_radius = 3;
  std::uint64_t seed = 1;

  std::size_t sentences() const { return affirmative + negative + interrogative; }
  void validate() const;
  bool operator==(const CorpusConfig&) const = default;
};

// On-disk configuration: {"schema_version": 1, "corpus": {...}, "model": {...}}.
// Both sections are optional; unknown keys are rejected at every level.
struct ConfigFile {
  static constexpr int kSchemaVersion = 1;
  CorpusConfig corpus;
  ModelConfig model;
  bool operator==(const ConfigFile&) const = default;
};

std::string serialize_config(const ConfigFile& config);
ConfigFile parse_config(const std::string& text);
ConfigFile load_config(const std::string& path);
void save_config(const ConfigFile& config, const std::string& path);

std::string serialize_model_config(const ModelConfig& config);
ModelConfig parse_model_config(const std::string& text);

std::string serialize_corpus_config(const CorpusConfig& config);
CorpusConfig parse_corpus_config(const std::string& text);

}  // namespace slt
