#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "slt/config.hpp"
#include "slt/decoder.hpp"
#include "slt/encoder.hpp"
#include "slt/layers.hpp"

namespace slt {

struct LossParts {
  Tensor total;
  Tensor ce;
  Tensor ctc;  // undefined when CTC is disabled
};

// Encoder + decoder sharing one parameter store. Not copyable: layers hold
// pointers into the store.
class Model {
 public:
  Model(const ModelConfig& config, std::size_t gloss_vocab, std::size_t text_vocab);
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  // Teacher-forced joint loss of one video. text_ids = BOS ... EOS.
  LossParts loss(const Tensor& frames, std::span<const std::size_t> gloss_ids, std::span<const std::size_t> text_ids,
                 ops::NormMode mode = ops::NormMode::kTrain);

  // Greedy translation in eval mode; the result starts with BOS.
  std::vector<std::size_t> translate(const Tensor& frames) const;

  // Parameters in a stable (name-sorted) order.
  std::vector<std::pair<std::string, Tensor>> named_parameters() const;

  const ModelConfig& config() const { return config_; }
  ParamStore& store() { return store_; }
  const ParamStore& store() const { return store_; }
  const Encoder& encoder() const { return encoder_; }
  const Decoder& decoder() const { return decoder_; }
  std::size_t gloss_vocab() const { return gloss_vocab_; }
  std::size_t text_vocab() const { return text_vocab_; }

 private:
  ModelConfig config_;
  std::size_t gloss_vocab_;
  std::size_t text_vocab_;
  ParamStore store_;
  Encoder encoder_;
  Decoder decoder_;
};

}  // namespace slt
