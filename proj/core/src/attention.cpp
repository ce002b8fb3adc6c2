#include "slt/attention.hpp"

#include <cmath>
#include <limits>

#include "slt/error.hpp"
#include "slt/ops.hpp"

namespace slt {

namespace {
double xavier_bound(std::size_t in, std::size_t out) { return std::sqrt(6.0 / static_cast<double>(in + out)); }
}  // namespace

Attention2D::Attention2D(ParamStore& store, const std::string& name, std::size_t channels)
    : channels_(channels), key_channels_(std::max<std::size_t>(1, channels / 8)) {
  query_ = Conv2d(store, name + ".query", channels, key_channels_, 1, 1, 0, xavier_bound(channels, key_channels_));
  // A key bias adds the same q.b to every score of a query row; softmax cancels it.
  key_ = Conv2d(store, name + ".key", channels, key_channels_, 1, 1, 0, xavier_bound(channels, key_channels_), false);
  value_ = Conv2d(store, name + ".value", channels, channels, 1, 1, 0, xavier_bound(channels, channels));
  out_ = Conv2d(store, name + ".out", 2 * channels, channels, 1, 1, 0, xavier_bound(2 * channels, channels));
  gamma_ = store.create(name + ".gamma", {1}, Init::zeros());
}

Attn2DResult Attention2D::forward(const Tensor& fmaps) const {
  if (fmaps.rank() != 4 || fmaps.dim(1) != channels_) {
    throw ConfigError("attention2d: weights expect " + std::to_string(channels_) + " channels, feature maps are " +
                      shape_str(fmaps.shape()));
  }
  const std::size_t frames = fmaps.dim(0), h = fmaps.dim(2), w = fmaps.dim(3), positions = h * w;
  auto q = ops::reshape(query_.forward(fmaps), {frames, key_channels_, positions});
  auto k = ops::reshape(key_.forward(fmaps), {frames, key_channels_, positions});
  auto v = ops::reshape(value_.forward(fmaps), {frames, channels_, positions});

  auto scores = ops::bmm(ops::permute(q, {0, 2, 1}), k);  // [T, hw(query), hw(key)]
  scores = ops::scale(scores, 1.0 / std::sqrt(static_cast<double>(key_channels_)));
  auto attn = ops::softmax(scores, 2);

  auto o = ops::bmm(v, ops::permute(attn, {0, 2, 1}));  // [T, C, hw]
  o = ops::reshape(o, {frames, channels_, h, w});
  auto mixed = out_.forward(ops::concat({o, fmaps}, 1));
  return {ops::add(fmaps, ops::mul_scalar(mixed, gamma_)), attn};
}

std::size_t AttentionMask::allowed_count() const {
  std::size_t n = 0;
  for (auto a : allowed) n += a != 0;
  return n;
}

AttentionMask causal_mask(std::size_t length) {
  if (length == 0) throw ContractError("causal_mask: length must be >= 1");
  AttentionMask m{length, length, std::vector<std::uint8_t>(length * length, 0)};
  for (std::size_t i = 0; i < length; ++i) {
    for (std::size_t j = 0; j <= i; ++j) m.allowed[i * length + j] = 1;
  }
  return m;
}

MultiHeadAttention::MultiHeadAttention(ParamStore& store, const std::string& name, std::size_t d_model,
                                       std::size_t heads)
    : d_model_(d_model), heads_(heads) {
  if (heads == 0 || d_model % heads != 0) {
    throw ConfigError("multi-head attention: d_model " + std::to_string(d_model) + " not divisible by " +
                      std::to_string(heads) + " heads");
  }
  wq_ = Linear(store, name + ".wq", d_model, d_model);
  wk_ = Linear(store, name + ".wk", d_model, d_model, false);
  wv_ = Linear(store, name + ".wv", d_model, d_model);
  wo_ = Linear(store, name + ".wo", d_model, d_model);
}

MHAResult MultiHeadAttention::forward(const Tensor& q_seq, const Tensor& k_seq, const Tensor& v_seq,
                                      const AttentionMask* mask) const {
  for (const Tensor* t : {&q_seq, &k_seq, &v_seq}) {
    if (t->rank() != 2 || t->dim(1) != d_model_) {
      throw ShapeError("multi-head attention: expected [L, " + std::to_string(d_model_) + "], got " +
                       shape_str(t->shape()));
    }
  }
  if (k_seq.dim(0) != v_seq.dim(0)) throw ShapeError("multi-head attention: key/value lengths differ");
  const std::size_t lq = q_seq.dim(0), lk = k_seq.dim(0), dh = d_model_ / heads_;
  if (mask && (mask->rows != lq || mask->cols != lk)) {
    throw ContractError("multi-head attention: mask is [" + std::to_string(mask->rows) + "," +
                        std::to_string(mask->cols) + "], scores are [" + std::to_string(lq) + "," +
                        std::to_string(lk) + "]");
  }
  auto q = ops::permute(ops::reshape(wq_.forward(q_seq), {lq, heads_, dh}), {1, 0, 2});  // [H, Lq, dh]
  auto k = ops::permute(ops::reshape(wk_.forward(k_seq), {lk, heads_, dh}), {1, 2, 0});  // [H, dh, Lk]
  auto v = ops::permute(ops::reshape(wv_.forward(v_seq), {lk, heads_, dh}), {1, 0, 2});  // [H, Lk, dh]
  auto scores = ops::scale(ops::bmm(q, k), 1.0 / std::sqrt(static_cast<double>(dh)));
  if (mask) {
    std::vector<double> bias(lq * lk, 0.0);
    for (std::size_t i = 0; i < bias.size(); ++i) {
      if (!mask->allowed[i]) bias[i] = -std::numeric_limits<double>::infinity();
    }
    scores = ops::add(scores, Tensor::from({lq, lk}, std::move(bias)));
  }
  auto weights = ops::softmax(scores, 2);
  auto context = ops::permute(ops::bmm(weights, v), {1, 0, 2});  // [Lq, H, dh]
  return {wo_.forward(ops::reshape(context, {lq, d_model_})), weights};
}

}  // namespace slt
