#include "slt/decoder.hpp"

#include <cmath>

#include "slt/error.hpp"
#include "slt/ops.hpp"

namespace slt {

Tensor sinusoidal_positions(std::size_t length, std::size_t d_model) {
  std::vector<double> table(length * d_model);
  for (std::size_t pos = 0; pos < length; ++pos) {
    for (std::size_t i = 0; i < d_model; ++i) {
      const double rate = std::pow(10000.0, static_cast<double>(2 * (i / 2)) / static_cast<double>(d_model));
      const double angle = static_cast<double>(pos) / rate;
      table[pos * d_model + i] = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  }
  return Tensor::from({length, d_model}, std::move(table));
}

DecoderLayer::DecoderLayer(ParamStore& store, const std::string& name, std::size_t d_model, std::size_t heads,
                           std::size_t ff)
    : self_attn_(store, name + ".self_attn", d_model, heads),
      cross_attn_(store, name + ".cross_attn", d_model, heads),
      ff1_(store, name + ".ff1", d_model, ff),
      ff2_(store, name + ".ff2", ff, d_model),
      norm1_(store, name + ".norm1", d_model),
      norm2_(store, name + ".norm2", d_model),
      norm3_(store, name + ".norm3", d_model) {}

Tensor DecoderLayer::forward(const Tensor& x, const Tensor& memory, const AttentionMask& mask, Tensor* self_w,
                             Tensor* cross_w) const {
  auto s = self_attn_.forward(x, x, x, &mask);
  auto h = norm1_.forward(ops::add(x, s.out));
  auto c = cross_attn_.forward(h, memory, memory);
  h = norm2_.forward(ops::add(h, c.out));
  auto f = ff2_.forward(ops::relu(ff1_.forward(h)));
  if (self_w) *self_w = s.weights;
  if (cross_w) *cross_w = c.weights;
  return norm3_.forward(ops::add(h, f));
}

Decoder::Decoder(ParamStore& store, const ModelConfig& config, std::size_t d_model, std::size_t vocab)
    : d_model_(d_model), vocab_(vocab) {
  if (vocab <= TextTokens::kUnk) throw ConfigError("text vocabulary must contain tokens beyond the reserved ids");
  embedding_ = store.create("decoder.embedding", {vocab, d_model}, Init::uniform(std::sqrt(3.0 / static_cast<double>(d_model))));
  for (std::size_t l = 0; l < config.decoder_layers; ++l) {
    layers_.emplace_back(store, "decoder.layer" + std::to_string(l), d_model, config.decoder_heads, config.decoder_ff);
  }
  output_ = Linear(store, "decoder.output", d_model, vocab);
}

DecoderOutput Decoder::forward(const Tensor& memory, std::span<const std::size_t> prefix) const {
  if (prefix.empty()) throw ContractError("decoder: prefix must contain at least BOS");
  if (prefix.front() != TextTokens::kBos) throw ContractError("decoder: prefix must start with BOS");
  for (auto id : prefix) {
    if (id >= vocab_) {
      throw VocabularyError("decoder: token id " + std::to_string(id) + " >= vocabulary size " + std::to_string(vocab_));
    }
  }
  if (memory.rank() != 2 || memory.dim(1) != d_model_) {
    throw ShapeError("decoder: memory must be [T, " + std::to_string(d_model_) + "], got " + shape_str(memory.shape()));
  }
  const std::size_t length = prefix.size();
  auto x = ops::scale(ops::embedding(embedding_, prefix), std::sqrt(static_cast<double>(d_model_)));
  x = ops::add(x, sinusoidal_positions(length, d_model_));
  const auto mask = causal_mask(length);
  DecoderOutput out;
  for (const auto& layer : layers_) {
    Tensor sw, cw;
    x = layer.forward(x, memory, mask, &sw, &cw);
    out.self_attn.push_back(sw);
    out.cross_attn.push_back(cw);
  }
  out.logits = output_.forward(x);
  return out;
}

std::vector<std::size_t> Decoder::greedy_decode(const Tensor& memory, std::size_t max_len) const {
  NoGradGuard no_grad;
  std::vector<std::size_t> seq{TextTokens::kBos};
  for (std::size_t step = 0; step < max_len; ++step) {
    const auto logits = forward(memory, seq).logits;
    const auto row = logits.data().subspan((seq.size() - 1) * vocab_, vocab_);
    std::size_t best = TextTokens::kEos;
    for (std::size_t v = 0; v < vocab_; ++v) {
      if (v == TextTokens::kPad || v == TextTokens::kBos) continue;
      if (row[v] > row[best] || (row[v] == row[best] && v < best)) best = v;
    }
    seq.push_back(best);
    if (best == TextTokens::kEos) break;
  }
  return seq;
}

}  // namespace slt
