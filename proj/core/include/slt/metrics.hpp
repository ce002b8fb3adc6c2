#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

namespace slt {

using TokenSeq = std::vector<std::string>;

struct BleuReport {
  std::array<double, 4> bleu{};        // bleu[n-1] = BLEU-n
  std::array<double, 4> precisions{};  // modified n-gram precision (after smoothing)
  std::array<std::size_t, 4> matches{};
  std::array<std::size_t, 4> totals{};
  double brevity_penalty = 1.0;
  std::size_t hypothesis_length = 0;
  std::size_t reference_length = 0;
  std::size_t n_sentences = 0;
};

struct BleuOptions {
  // Added in place of a zero match count; 0 disables smoothing.
  double epsilon = 1e-9;
};

// Corpus-level BLEU with clipped n-gram counts and brevity penalty
// exp(1 - r/c) when c < r. BLEU-n = BP * exp(mean_{k<=n} log p_k).
// Throws ContractError on an empty corpus or mismatched list lengths.
BleuReport corpus_bleu(const std::vector<TokenSeq>& hypotheses, const std::vector<TokenSeq>& references,
                       BleuOptions options = {});

// {"bleu1".."bleu4", "bp", "precisions", "n_sentences"}
std::string bleu_json(const BleuReport& report);

}  // namespace slt
