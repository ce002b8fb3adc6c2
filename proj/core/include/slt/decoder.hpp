#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "slt/attention.hpp"
#include "slt/config.hpp"
#include "slt/layers.hpp"

namespace slt {

// Reserved text-token ids shared by the decoder and the vocabulary.
struct TextTokens {
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kBos = 1;
  static constexpr std::size_t kEos = 2;
  static constexpr std::size_t kUnk = 3;
};

// [length, d] table of 1D sinusoidal position encodings.
Tensor sinusoidal_positions(std::size_t length, std::size_t d_model);

struct DecoderOutput {
  Tensor logits;                   // [L, V]
  std::vector<Tensor> self_attn;   // per layer, [heads, L, L]
  std::vector<Tensor> cross_attn;  // per layer, [heads, L, T]
};

// Post-norm Transformer decoder layer: masked self-attention, cross-attention
// over the encoder memory, position-wise feed-forward.
class DecoderLayer {
 public:
  DecoderLayer(ParamStore& store, const std::string& name, std::size_t d_model, std::size_t heads, std::size_t ff);
  Tensor forward(const Tensor& x, const Tensor& memory, const AttentionMask& mask, Tensor* self_w,
                 Tensor* cross_w) const;

 private:
  MultiHeadAttention self_attn_, cross_attn_;
  Linear ff1_, ff2_;
  LayerNorm norm1_, norm2_, norm3_;
};

class Decoder {
 public:
  Decoder(ParamStore& store, const ModelConfig& config, std::size_t d_model, std::size_t vocab);

  // prefix starts with BOS; logits at position t depend only on prefix[0..t].
  DecoderOutput forward(const Tensor& memory, std::span<const std::size_t> prefix) const;

  // Argmax decoding from BOS until EOS or `max_len` generated tokens. PAD and
  // BOS are never generated; ties go to the lowest id. The returned sequence
  // starts with BOS.
  std::vector<std::size_t> greedy_decode(const Tensor& memory, std::size_t max_len) const;

  std::size_t vocab() const { return vocab_; }
  std::size_t d_model() const { return d_model_; }

 private:
  std::size_t d_model_;
  std::size_t vocab_;
  Tensor embedding_;
  std::vector<DecoderLayer> layers_;
  Linear output_;
};

}  // namespace slt
