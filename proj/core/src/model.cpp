#include "slt/model.hpp"

#include "slt/error.hpp"
#include "slt/losses.hpp"

namespace slt {

namespace {
const ModelConfig& validated(const ModelConfig& c) {
  c.validate();
  return c;
}
}  // namespace

Model::Model(const ModelConfig& config, std::size_t gloss_vocab, std::size_t text_vocab)
    : config_(validated(config)),
      gloss_vocab_(gloss_vocab),
      text_vocab_(text_vocab),
      store_(config.seed),
      encoder_(store_, config_, gloss_vocab),
      decoder_(store_, config_, encoder_.d_model(), text_vocab) {}

LossParts Model::loss(const Tensor& frames, std::span<const std::size_t> gloss_ids,
                      std::span<const std::size_t> text_ids, ops::NormMode mode) {
  if (text_ids.size() < 2) throw ContractError("model loss: text needs at least BOS and EOS");
  const auto enc = encoder_.forward(frames, mode);
  const auto out = decoder_.forward(enc.memory, text_ids.first(text_ids.size() - 1));
  LossParts parts;
  parts.ce = cross_entropy(out.logits, text_ids.subspan(1), TextTokens::kPad);
  if (config_.ctc_enabled()) parts.ctc = ctc_loss(enc.gloss_log_probs, gloss_ids);
  parts.total = joint_loss(parts.ce, parts.ctc, config_.lambda_ctc);
  return parts;
}

std::vector<std::size_t> Model::translate(const Tensor& frames) const {
  NoGradGuard no_grad;
  const auto enc = encoder_.forward(frames, ops::NormMode::kEval);
  return decoder_.greedy_decode(enc.memory, config_.max_decode_len);
}

std::vector<std::pair<std::string, Tensor>> Model::named_parameters() const {
  std::vector<std::pair<std::string, Tensor>> out;
  for (const auto& [name, t] : store_.params()) out.emplace_back(name, t);
  return out;
}

}  // namespace slt
