#pragma once

#include <cstddef>
#include <optional>
#include <span>

#include "slt/tensor.hpp"

namespace slt {

// Mean over non-pad positions of -log softmax(logits[t])[targets[t]].
// logits: [L, V]. Throws ContractError when every position is padding.
Tensor cross_entropy(const Tensor& logits, std::span<const std::size_t> targets, std::size_t pad_id);

// Smallest number of frames that can emit `targets` under CTC: one frame per
// label plus one blank between each pair of equal neighbours.
std::size_t ctc_min_frames(std::span<const std::size_t> targets);

// Negative log-likelihood of `targets` summed over every CTC alignment, via the
// forward recursion in log space. log_probs: [T, G+1] with blank at index 0;
// targets are gloss ids in [1, G]. The gradient w.r.t. log_probs comes from the
// forward-backward posteriors.
// Throws InfeasibleAlignmentError if T < ctc_min_frames(targets).
Tensor ctc_loss(const Tensor& log_probs, std::span<const std::size_t> targets);

// ce + lambda * ctc. An undefined ctc tensor or lambda == 0 returns ce itself.
Tensor joint_loss(const Tensor& ce, const Tensor& ctc, double lambda_ctc);

struct LossReport {
  double ce = 0.0;
  std::optional<double> ctc;
  double total = 0.0;
};

}  // namespace slt
