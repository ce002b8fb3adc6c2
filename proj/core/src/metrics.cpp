#include "slt/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <json.hpp>

#include "slt/error.hpp"

namespace slt {

namespace {

std::map<TokenSeq, std::size_t> ngram_counts(const TokenSeq& tokens, std::size_t n) {
  std::map<TokenSeq, std::size_t> counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    ++counts[TokenSeq(tokens.begin() + static_cast<std::ptrdiff_t>(i), tokens.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return counts;
}

}  // namespace

BleuReport corpus_bleu(const std::vector<TokenSeq>& hypotheses, const std::vector<TokenSeq>& references,
                       BleuOptions options) {
  if (hypotheses.empty()) throw ContractError("corpus_bleu: empty corpus");
  if (hypotheses.size() != references.size()) {
    throw ContractError("corpus_bleu: " + std::to_string(hypotheses.size()) + " hypotheses vs " +
                        std::to_string(references.size()) + " references");
  }
  BleuReport r;
  r.n_sentences = hypotheses.size();
  for (std::size_t s = 0; s < hypotheses.size(); ++s) {
    r.hypothesis_length += hypotheses[s].size();
    r.reference_length += references[s].size();
    for (std::size_t n = 1; n <= 4; ++n) {
      const auto hyp = ngram_counts(hypotheses[s], n);
      const auto ref = ngram_counts(references[s], n);
      for (const auto& [gram, count] : hyp) {
        auto it = ref.find(gram);
        r.matches[n - 1] += std::min(count, it == ref.end() ? std::size_t{0} : it->second);
        r.totals[n - 1] += count;
      }
    }
  }

  const double c = static_cast<double>(r.hypothesis_length);
  const double ref_len = static_cast<double>(r.reference_length);
  r.brevity_penalty = c >= ref_len ? 1.0 : (c == 0.0 ? 0.0 : std::exp(1.0 - ref_len / c));

  double log_sum = 0.0;
  bool zero = false;
  for (std::size_t n = 0; n < 4; ++n) {
    double p = 0.0;
    if (r.totals[n] > 0) {
      const double m = r.matches[n] > 0 ? static_cast<double>(r.matches[n]) : options.epsilon;
      p = m / static_cast<double>(r.totals[n]);
    }
    r.precisions[n] = p;
    if (p <= 0.0) zero = true;
    if (!zero) log_sum += std::log(p);
    r.bleu[n] = zero ? 0.0 : r.brevity_penalty * std::exp(log_sum / static_cast<double>(n + 1));
  }
  return r;
}

std::string bleu_json(const BleuReport& r) {
  nlohmann::json j{{"bleu1", r.bleu[0]},
                   {"bleu2", r.bleu[1]},
                   {"bleu3", r.bleu[2]},
                   {"bleu4", r.bleu[3]},
                   {"bp", r.brevity_penalty},
                   {"precisions", r.precisions},
                   {"n_sentences", r.n_sentences}};
  return j.dump();
}

}  // namespace slt
