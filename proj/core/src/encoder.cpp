#include "slt/encoder.hpp"

#include "slt/error.hpp"
#include "slt/ops.hpp"

namespace slt {

Backbone::Backbone(ParamStore& store, const ModelConfig& config)
    : in_channels_(input_channels(config.input_kind)),
      input_size_(config.backbone.input_size),
      out_channels_(config.backbone.output_channels()),
      grid_(config.backbone.output_extent()),
      kind_(config.input_kind) {
  const auto& b = config.backbone;
  std::size_t in = in_channels_;
  for (std::size_t i = 0; i < b.channels.size(); ++i) {
    stages_.emplace_back(store, "backbone.stage" + std::to_string(i), in, b.channels[i], b.kernel, b.stride, b.padding);
    in = b.channels[i];
  }
}

Tensor Backbone::forward(const Tensor& frames) const {
  if (frames.rank() != 4 || frames.dim(1) != in_channels_) {
    throw ConfigError("backbone configured for " + to_string(kind_) + " input with " + std::to_string(in_channels_) +
                      " channels, got frames " + shape_str(frames.shape()));
  }
  if (frames.dim(2) != input_size_ || frames.dim(3) != input_size_) {
    throw ConfigError("backbone expects " + std::to_string(input_size_) + "x" + std::to_string(input_size_) +
                      " frames, got " + shape_str(frames.shape()));
  }
  Tensor x = frames;
  for (const auto& stage : stages_) x = ops::relu(stage.forward(x));
  return x;
}

ConvFeedForward::ConvFeedForward(ParamStore& store, const std::string& name, std::size_t channels)
    : expand_(store, name + ".conv1", channels, 2 * channels, 3, 1, 1, -1.0, false),
      project_(store, name + ".conv2", 2 * channels, channels, 3, 1, 1, -1.0, false),
      norm1_(store, name + ".bn1", 2 * channels),
      norm2_(store, name + ".bn2", channels) {}

Tensor ConvFeedForward::forward(const Tensor& fmaps, ops::NormMode mode) const {
  auto x = ops::relu(norm1_.forward(expand_.forward(fmaps), mode));
  return ops::relu(norm2_.forward(project_.forward(x), mode));
}

Tensor flatten_maps(const Tensor& fmaps) {
  if (fmaps.rank() != 4) throw ShapeError("flatten_maps: expected [T,C,h,w], got " + shape_str(fmaps.shape()));
  return ops::reshape(fmaps, {fmaps.dim(0), fmaps.dim(1) * fmaps.dim(2) * fmaps.dim(3)});
}

Tensor unflatten_maps(const Tensor& memory, std::size_t channels, std::size_t height, std::size_t width) {
  if (memory.rank() != 2 || memory.dim(1) != channels * height * width) {
    throw ShapeError("unflatten_maps: " + shape_str(memory.shape()) + " is not [T, " +
                     std::to_string(channels * height * width) + "]");
  }
  return ops::reshape(memory, {memory.dim(0), channels, height, width});
}

Encoder::Encoder(ParamStore& store, const ModelConfig& config, std::size_t gloss_classes)
    : config_(config), d_model_(config.d_model()), backbone_(store, config) {
  const std::size_t c = backbone_.out_channels(), g = backbone_.grid();
  if (config.use_pe2d) pe_ = build_pe2d(c, g, g);
  if (config.use_attn2d) attention_.emplace(store, "encoder.attn2d", c);
  if (config.use_ffn2d) ffn_.emplace(store, "encoder.ffn2d", c);
  if (config.use_glosses) {
    if (gloss_classes < 2) throw ConfigError("gloss head needs at least one gloss besides blank");
    gloss_head_.emplace(store, "encoder.gloss_head", d_model_, gloss_classes);
  }
}

EncoderOutput Encoder::forward(const Tensor& frames, ops::NormMode mode) const {
  EncoderOutput out;
  Tensor maps = backbone_.forward(frames);
  if (pe_) maps = add_pe2d(maps, *pe_);
  if (attention_) {
    auto r = attention_->forward(maps);
    maps = r.maps;
    out.attention = r.attention;
  }
  if (ffn_) maps = ffn_->forward(maps, mode);
  out.memory = flatten_maps(maps);
  if (gloss_head_) out.gloss_log_probs = ops::log_softmax(gloss_head_->forward(out.memory), 1);
  return out;
}

}  // namespace slt
