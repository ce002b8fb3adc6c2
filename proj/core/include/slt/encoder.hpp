#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "slt/attention.hpp"
#include "slt/config.hpp"
#include "slt/layers.hpp"
#include "slt/posenc2d.hpp"

namespace slt {

// Small trainable convnet standing in for a pretrained image backbone. Each
// stage is conv(kernel, stride, padding) + ReLU; frames are processed
// independently and the last stage's grid is kept as 2D feature maps.
class Backbone {
 public:
  Backbone() = default;
  Backbone(ParamStore& store, const ModelConfig& config);

  // frames: [T, Cin, H0, W0] -> [T, C, h, w]
  Tensor forward(const Tensor& frames) const;

  std::size_t in_channels() const { return in_channels_; }
  std::size_t out_channels() const { return out_channels_; }
  std::size_t grid() const { return grid_; }

 private:
  std::size_t in_channels_ = 0;
  std::size_t input_size_ = 0;
  std::size_t out_channels_ = 0;
  std::size_t grid_ = 0;
  InputKind kind_ = InputKind::kFlow;
  std::vector<Conv2d> stages_;
};

// Two 3x3 same-padding convolutions (C -> 2C -> C), each followed by batch
// norm and ReLU.
class ConvFeedForward {
 public:
  ConvFeedForward() = default;
  ConvFeedForward(ParamStore& store, const std::string& name, std::size_t channels);
  Tensor forward(const Tensor& fmaps, ops::NormMode mode) const;

 private:
  Conv2d expand_, project_;
  BatchNorm2d norm1_, norm2_;
};

// Row-major flatten of every frame: [T, C, h, w] -> [T, C*h*w].
Tensor flatten_maps(const Tensor& fmaps);
Tensor unflatten_maps(const Tensor& memory, std::size_t channels, std::size_t height, std::size_t width);

struct EncoderOutput {
  Tensor memory;           // [T, d_model]
  Tensor gloss_log_probs;  // [T, G+1], blank = 0; undefined unless use_glosses
  Tensor attention;        // [T, hw, hw]; undefined unless use_attn2d
};

// backbone -> (+PE2D) -> (2D self-attention) -> (conv FFN) -> flatten, with a
// per-frame gloss classifier on the flattened memory.
class Encoder {
 public:
  Encoder(ParamStore& store, const ModelConfig& config, std::size_t gloss_classes);

  EncoderOutput forward(const Tensor& frames, ops::NormMode mode) const;

  std::size_t d_model() const { return d_model_; }
  const Backbone& backbone() const { return backbone_; }
  const std::optional<Attention2D>& attention() const { return attention_; }

 private:
  ModelConfig config_;
  std::size_t d_model_;
  Backbone backbone_;
  std::optional<PosEnc2D> pe_;
  std::optional<Attention2D> attention_;
  std::optional<ConvFeedForward> ffn_;
  std::optional<Linear> gloss_head_;
};

}  // namespace slt
