#include "slt/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "slt/error.hpp"
#include "slt/ops.hpp"

namespace slt {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

}  // namespace

Tensor cross_entropy(const Tensor& logits, std::span<const std::size_t> targets, std::size_t pad_id) {
  if (logits.rank() != 2 || logits.dim(0) != targets.size()) {
    throw ShapeError("cross_entropy: logits " + shape_str(logits.shape()) + " vs " + std::to_string(targets.size()) +
                     " targets");
  }
  const std::size_t rows = logits.dim(0), vocab = logits.dim(1);
  std::size_t valid = 0;
  for (auto t : targets) {
    if (t == pad_id) continue;
    if (t >= vocab) throw VocabularyError("cross_entropy: target " + std::to_string(t) + " >= " + std::to_string(vocab));
    ++valid;
  }
  if (valid == 0) throw ContractError("cross_entropy: every target position is padding");

  const auto x = logits.data();
  std::vector<double> probs(rows * vocab, 0.0);
  double total = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    if (targets[r] == pad_id) continue;
    const double* xr = x.data() + r * vocab;
    const double mx = *std::max_element(xr, xr + vocab);
    double s = 0.0;
    for (std::size_t v = 0; v < vocab; ++v) s += std::exp(xr[v] - mx);
    const double lse = mx + std::log(s);
    total += lse - xr[targets[r]];
    for (std::size_t v = 0; v < vocab; ++v) probs[r * vocab + v] = std::exp(xr[v] - lse);
  }
  const double inv = 1.0 / static_cast<double>(valid);
  auto pl = logits.node();
  std::vector<std::size_t> tgt(targets.begin(), targets.end());
  return make_result({1}, {total * inv}, {logits},
                     [pl, probs = std::move(probs), tgt = std::move(tgt), pad_id, vocab, inv](const std::vector<double>& g) {
                       if (!pl->requires_grad) return;
                       auto& gl = pl->grad_buffer();
                       for (std::size_t r = 0; r < tgt.size(); ++r) {
                         if (tgt[r] == pad_id) continue;
                         for (std::size_t v = 0; v < vocab; ++v) {
                           const double onehot = v == tgt[r] ? 1.0 : 0.0;
                           gl[r * vocab + v] += g[0] * inv * (probs[r * vocab + v] - onehot);
                         }
                       }
                     },
                     "cross_entropy");
}

std::size_t ctc_min_frames(std::span<const std::size_t> targets) {
  std::size_t n = targets.size();
  for (std::size_t i = 1; i < targets.size(); ++i) n += targets[i] == targets[i - 1];
  return n;
}

Tensor ctc_loss(const Tensor& log_probs, std::span<const std::size_t> targets) {
  if (log_probs.rank() != 2) throw ShapeError("ctc_loss: log_probs must be [T, G+1], got " + shape_str(log_probs.shape()));
  if (targets.empty()) throw ContractError("ctc_loss: empty target sequence");
  const std::size_t frames = log_probs.dim(0), classes = log_probs.dim(1);
  for (auto t : targets) {
    if (t == 0 || t >= classes) {
      throw VocabularyError("ctc_loss: target id " + std::to_string(t) + " outside [1, " + std::to_string(classes - 1) + "]");
    }
  }
  const std::size_t need = ctc_min_frames(targets);
  if (frames < need) {
    throw InfeasibleAlignmentError("ctc_loss: " + std::to_string(frames) + " frames cannot align " +
                                   std::to_string(targets.size()) + " labels (needs " + std::to_string(need) + ")");
  }

  // Extended label sequence: blank, l1, blank, l2, ..., blank.
  const std::size_t states = 2 * targets.size() + 1;
  std::vector<std::size_t> ext(states, 0);
  for (std::size_t i = 0; i < targets.size(); ++i) ext[2 * i + 1] = targets[i];
  auto can_skip = [&](std::size_t s) { return s >= 2 && ext[s] != 0 && ext[s] != ext[s - 2]; };

  const auto lp = log_probs.data();
  auto emit = [&](std::size_t t, std::size_t s) { return lp[t * classes + ext[s]]; };

  // alpha[t][s]: log prob of all prefixes ending in state s at t (emission at t included).
  std::vector<double> alpha(frames * states, kNegInf);
  alpha[0] = emit(0, 0);
  if (states > 1) alpha[1] = emit(0, 1);
  for (std::size_t t = 1; t < frames; ++t) {
    for (std::size_t s = 0; s < states; ++s) {
      double a = alpha[(t - 1) * states + s];
      if (s >= 1) a = log_add(a, alpha[(t - 1) * states + s - 1]);
      if (can_skip(s)) a = log_add(a, alpha[(t - 1) * states + s - 2]);
      alpha[t * states + s] = a == kNegInf ? kNegInf : a + emit(t, s);
    }
  }
  const double log_likelihood =
      log_add(alpha[(frames - 1) * states + states - 1], alpha[(frames - 1) * states + states - 2]);
  if (!std::isfinite(log_likelihood)) throw NumericError("ctc_loss: non-finite log-likelihood");

  // beta[t][s]: log prob of completing from state s at t (emission at t excluded).
  std::vector<double> beta(frames * states, kNegInf);
  beta[(frames - 1) * states + states - 1] = 0.0;
  beta[(frames - 1) * states + states - 2] = 0.0;
  for (std::size_t t = frames - 1; t-- > 0;) {
    for (std::size_t s = 0; s < states; ++s) {
      double b = beta[(t + 1) * states + s] + emit(t + 1, s);
      if (s + 1 < states) b = log_add(b, beta[(t + 1) * states + s + 1] + emit(t + 1, s + 1));
      if (s + 2 < states && can_skip(s + 2)) b = log_add(b, beta[(t + 1) * states + s + 2] + emit(t + 1, s + 2));
      beta[t * states + s] = b;
    }
  }

  // d(-log P)/d log_probs[t,k] = -sum_{s: ext[s]=k} exp(alpha + beta - log P)
  std::vector<double> grad(frames * classes, 0.0);
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t s = 0; s < states; ++s) {
      const double ab = alpha[t * states + s] + beta[t * states + s];
      if (ab == kNegInf) continue;
      grad[t * classes + ext[s]] -= std::exp(ab - log_likelihood);
    }
  }
  auto pl = log_probs.node();
  return make_result({1}, {-log_likelihood}, {log_probs},
                     [pl, grad = std::move(grad)](const std::vector<double>& g) {
                       if (!pl->requires_grad) return;
                       auto& gl = pl->grad_buffer();
                       for (std::size_t i = 0; i < grad.size(); ++i) gl[i] += g[0] * grad[i];
                     },
                     "ctc_loss");
}

Tensor joint_loss(const Tensor& ce, const Tensor& ctc, double lambda_ctc) {
  if (lambda_ctc < 0.0) throw ContractError("joint_loss: lambda_ctc must be >= 0");
  if (!ctc.defined() || lambda_ctc == 0.0) return ce;
  return ops::add(ce, ops::scale(ctc, lambda_ctc));
}

}  // namespace slt
