#include "slt/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "slt/error.hpp"
#include "slt/ops.hpp"

namespace slt {

using nlohmann::json;

std::string to_string(InputKind kind) { return kind == InputKind::kRgb ? "rgb" : "flow"; }

InputKind parse_input_kind(const std::string& text) {
  if (text == "rgb") return InputKind::kRgb;
  if (text == "flow") return InputKind::kFlow;
  throw ConfigError("input_kind must be \"rgb\" or \"flow\", got \"" + text + "\"");
}

std::size_t input_channels(InputKind kind) { return kind == InputKind::kRgb ? 3 : 2; }

std::size_t BackboneConfig::output_extent() const {
  if (channels.empty()) throw ConfigError("backbone needs at least one stage");
  std::size_t extent = input_size;
  for (std::size_t i = 0; i < channels.size(); ++i) extent = ops::conv_out_extent(extent, kernel, stride, padding);
  return extent;
}

std::size_t ModelConfig::d_model() const {
  const auto e = backbone.output_extent();
  return backbone.output_channels() * e * e;
}

void ModelConfig::validate() const {
  if (batch_size != 1) throw ConfigError("batch_size is fixed at 1, got " + std::to_string(batch_size));
  if (epochs == 0) throw ConfigError("epochs must be positive");
  if (max_decode_len == 0) throw ConfigError("max_decode_len must be positive");
  if (decoder_layers == 0) throw ConfigError("decoder_layers must be positive");
  if (decoder_ff == 0) throw ConfigError("decoder_ff must be positive");
  for (auto c : backbone.channels) {
    if (c == 0) throw ConfigError("backbone channel counts must be positive");
  }
  const auto dm = d_model();
  if (use_pe2d && backbone.output_channels() % 4 != 0) {
    throw ConfigError("use_pe2d requires the backbone output channels to be a multiple of 4, got " +
                      std::to_string(backbone.output_channels()));
  }
  if (decoder_heads == 0 || dm % decoder_heads != 0) {
    throw ConfigError("d_model " + std::to_string(dm) + " is not divisible by " + std::to_string(decoder_heads) +
                      " decoder heads");
  }
  if (!(lambda_ctc >= 0.0)) throw ConfigError("lambda_ctc must be >= 0");
  if (!(optimizer.lr > 0.0)) throw ConfigError("optimizer.lr must be positive");
  if (!(optimizer.beta1 >= 0.0 && optimizer.beta1 < 1.0) || !(optimizer.beta2 >= 0.0 && optimizer.beta2 < 1.0)) {
    throw ConfigError("optimizer betas must lie in [0, 1)");
  }
  if (!(optimizer.eps > 0.0)) throw ConfigError("optimizer.eps must be positive");
  if (!(optimizer.max_grad_norm >= 0.0)) throw ConfigError("optimizer.max_grad_norm must be >= 0");
}

void CorpusConfig::validate() const {
  if (sentences() == 0) throw ConfigError("corpus needs at least one sentence");
  if (sentences() > 72) throw ConfigError("the gloss grammar has only 72 distinct sentence frames");
  if (affirmative == 0) throw ConfigError("affirmative must be >= 1 (the anchor sentence is affirmative)");
  if (repetitions == 0) throw ConfigError("repetitions must be positive");
  if (frames_per_gesture < 2) throw ConfigError("frames_per_gesture must be >= 2");
  if (image_size < 16) throw ConfigError("image_size must be >= 16");
  if (flow_block == 0 || image_size % flow_block != 0) throw ConfigError("flow_block must divide image_size");
  if (!(speed_jitter >= 0.0 && speed_jitter < 0.5)) throw ConfigError("speed_jitter must lie in [0, 0.5)");
}

namespace {

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + " must be a JSON object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!allowed.count(it.key())) throw ConfigError("unknown key \"" + it.key() + "\" in " + where);
  }
}

template <typename T>
void read(const json& obj, const char* key, T& out, const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

json model_to_json(const ModelConfig& m) {
  return json{
      {"input_kind", to_string(m.input_kind)},
      {"use_pe2d", m.use_pe2d},
      {"use_attn2d", m.use_attn2d},
      {"use_ffn2d", m.use_ffn2d},
      {"use_glosses", m.use_glosses},
      {"backbone",
       {{"input_size", m.backbone.input_size},
        {"channels", m.backbone.channels},
        {"kernel", m.backbone.kernel},
        {"stride", m.backbone.stride},
        {"padding", m.backbone.padding}}},
      {"decoder_heads", m.decoder_heads},
      {"decoder_layers", m.decoder_layers},
      {"decoder_ff", m.decoder_ff},
      {"max_decode_len", m.max_decode_len},
      {"epochs", m.epochs},
      {"batch_size", m.batch_size},
      {"seed", m.seed},
      {"lambda_ctc", m.lambda_ctc},
      {"optimizer",
       {{"lr", m.optimizer.lr},
        {"beta1", m.optimizer.beta1},
        {"beta2", m.optimizer.beta2},
        {"eps", m.optimizer.eps},
        {"max_grad_norm", m.optimizer.max_grad_norm}}},
  };
}

ModelConfig model_from_json(const json& j) {
  const std::string where = "model";
  reject_unknown(j, {"input_kind", "use_pe2d", "use_attn2d", "use_ffn2d", "use_glosses", "backbone", "decoder_heads",
                     "decoder_layers", "decoder_ff", "max_decode_len", "epochs", "batch_size", "seed", "lambda_ctc",
                     "optimizer"},
                 where);
  ModelConfig m;
  if (j.contains("input_kind")) {
    std::string kind;
    read(j, "input_kind", kind, where);
    m.input_kind = parse_input_kind(kind);
  }
  read(j, "use_pe2d", m.use_pe2d, where);
  read(j, "use_attn2d", m.use_attn2d, where);
  read(j, "use_ffn2d", m.use_ffn2d, where);
  read(j, "use_glosses", m.use_glosses, where);
  if (j.contains("backbone")) {
    const auto& b = j.at("backbone");
    const std::string bw = "model.backbone";
    reject_unknown(b, {"input_size", "channels", "kernel", "stride", "padding"}, bw);
    read(b, "input_size", m.backbone.input_size, bw);
    read(b, "channels", m.backbone.channels, bw);
    read(b, "kernel", m.backbone.kernel, bw);
    read(b, "stride", m.backbone.stride, bw);
    read(b, "padding", m.backbone.padding, bw);
  }
  read(j, "decoder_heads", m.decoder_heads, where);
  read(j, "decoder_layers", m.decoder_layers, where);
  read(j, "decoder_ff", m.decoder_ff, where);
  read(j, "max_decode_len", m.max_decode_len, where);
  read(j, "epochs", m.epochs, where);
  read(j, "batch_size", m.batch_size, where);
  read(j, "seed", m.seed, where);
  read(j, "lambda_ctc", m.lambda_ctc, where);
  if (j.contains("optimizer")) {
    const auto& o = j.at("optimizer");
    const std::string ow = "model.optimizer";
    reject_unknown(o, {"lr", "beta1", "beta2", "eps", "max_grad_norm"}, ow);
    read(o, "lr", m.optimizer.lr, ow);
    read(o, "beta1", m.optimizer.beta1, ow);
    read(o, "beta2", m.optimizer.beta2, ow);
    read(o, "eps", m.optimizer.eps, ow);
    read(o, "max_grad_norm", m.optimizer.max_grad_norm, ow);
  }
  m.validate();
  return m;
}

json corpus_to_json(const CorpusConfig& c) {
  return json{{"affirmative", c.affirmative},       {"negative", c.negative},
              {"interrogative", c.interrogative},   {"repetitions", c.repetitions},
              {"frames_per_gesture", c.frames_per_gesture}, {"image_size", c.image_size},
              {"speed_jitter", c.speed_jitter},     {"flow_block", c.flow_block},
              {"flow_radius", c.flow_radius},       {"seed", c.seed}};
}

CorpusConfig corpus_from_json(const json& j) {
  const std::string where = "corpus";
  reject_unknown(j, {"affirmative", "negative", "interrogative", "repetitions", "frames_per_gesture", "image_size",
                     "speed_jitter", "flow_block", "flow_radius", "seed"},
                 where);
  CorpusConfig c;
  read(j, "affirmative", c.affirmative, where);
  read(j, "negative", c.negative, where);
  read(j, "interrogative", c.interrogative, where);
  read(j, "repetitions", c.repetitions, where);
  read(j, "frames_per_gesture", c.frames_per_gesture, where);
  read(j, "image_size", c.image_size, where);
  read(j, "speed_jitter", c.speed_jitter, where);
  read(j, "flow_block", c.flow_block, where);
  read(j, "flow_radius", c.flow_radius, where);
  read(j, "seed", c.seed, where);
  c.validate();
  return c;
}

json parse_json(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
}

}  // namespace

std::string serialize_config(const ConfigFile& config) {
  json j{{"schema_version", ConfigFile::kSchemaVersion},
         {"corpus", corpus_to_json(config.corpus)},
         {"model", model_to_json(config.model)}};
  return j.dump(2) + "\n";
}

ConfigFile parse_config(const std::string& text) {
  const json j = parse_json(text);
  reject_unknown(j, {"schema_version", "corpus", "model"}, "config");
  if (!j.contains("schema_version")) throw ConfigError("config is missing schema_version");
  int version = 0;
  read(j, "schema_version", version, "config");
  if (version != ConfigFile::kSchemaVersion) {
    throw ConfigError("unsupported config schema_version " + std::to_string(version));
  }
  ConfigFile out;
  if (j.contains("corpus")) out.corpus = corpus_from_json(j.at("corpus"));
  if (j.contains("model")) out.model = model_from_json(j.at("model"));
  return out;
}

ConfigFile load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

void save_config(const ConfigFile& config, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write config file: " + path);
  out << serialize_config(config);
}

std::string serialize_model_config(const ModelConfig& config) { return model_to_json(config).dump(); }

ModelConfig parse_model_config(const std::string& text) { return model_from_json(parse_json(text)); }

std::string serialize_corpus_config(const CorpusConfig& config) { return corpus_to_json(config).dump(); }

CorpusConfig parse_corpus_config(const std::string& text) { return corpus_from_json(parse_json(text)); }

}  // namespace slt
