#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "slt/layers.hpp"
#include "slt/tensor.hpp"

namespace slt {

struct Attn2DResult {
  Tensor maps;       // [T, C, h, w]
  Tensor attention;  // [T, h*w, h*w]; rows are query positions and sum to 1
};

// Pixel-wise self-attention over each frame's feature map.
//
// Per frame, with F flattened to [C, h*w]:
//   Q = W_Q F, K = W_K F   (1x1 convolutions, C -> max(1, C/8) channels)
//   V = W_V F              (1x1 convolution, C -> C)
//   A = softmax_rows(Q^T K / sqrt(d_k))
//   O = V A^T
//   out = F + gamma * W_out(concat(O, F))    (W_out: 1x1, 2C -> C)
//
// gamma starts at 0, so a freshly built block is an exact identity.
// Frames are attended independently.
class Attention2D {
 public:
  Attention2D() = default;
  Attention2D(ParamStore& store, const std::string& name, std::size_t channels);

  Attn2DResult forward(const Tensor& fmaps) const;

  std::size_t channels() const { return channels_; }
  std::size_t key_channels() const { return key_channels_; }
  const Tensor& gamma() const { return gamma_; }

 private:
  std::size_t channels_ = 0;
  std::size_t key_channels_ = 0;
  Conv2d query_, key_, value_, out_;
  Tensor gamma_;
};

// Boolean [rows, cols] attention mask; true = may attend.
struct AttentionMask {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> allowed;

  bool at(std::size_t i, std::size_t j) const { return allowed[i * cols + j] != 0; }
  std::size_t allowed_count() const;
};

// Entry (i, j) allowed iff j <= i.
AttentionMask causal_mask(std::size_t length);

struct MHAResult {
  Tensor out;      // [Lq, d_model]
  Tensor weights;  // [heads, Lq, Lk]
};

// Standard scaled dot-product multi-head attention with separate query, key,
// value and output projections. No dropout.
class MultiHeadAttention {
 public:
  MultiHeadAttention() = default;
  MultiHeadAttention(ParamStore& store, const std::string& name, std::size_t d_model, std::size_t heads);

  MHAResult forward(const Tensor& q_seq, const Tensor& k_seq, const Tensor& v_seq,
                    const AttentionMask* mask = nullptr) const;

  std::size_t heads() const { return heads_; }
  std::size_t d_model() const { return d_model_; }

 private:
  std::size_t d_model_ = 0;
  std::size_t heads_ = 0;
  Linear wq_, wk_, wv_, wo_;
};

}  // namespace slt
