#include "slt/layers.hpp"

#include <cmath>

#include "slt/error.hpp"
#include "slt/rng.hpp"

namespace slt {

Tensor ParamStore::create(const std::string& name, Shape shape, Init init) {
  if (params_.count(name)) throw ContractError("duplicate parameter name: " + name);
  const std::size_t n = shape_numel(shape);
  std::vector<double> values(n, 0.0);
  switch (init.kind) {
    case Init::Kind::kZeros: break;
    case Init::Kind::kOnes: std::fill(values.begin(), values.end(), 1.0); break;
    case Init::Kind::kConstant: std::fill(values.begin(), values.end(), init.scale); break;
    case Init::Kind::kUniform: {
      Rng rng(seed_, "init/" + name);
      for (auto& v : values) v = rng.uniform(-init.scale, init.scale);
      break;
    }
  }
  auto t = Tensor::from(std::move(shape), std::move(values), true);
  params_.emplace(name, t);
  return t;
}

ops::BatchNormStats& ParamStore::create_stats(const std::string& name, std::size_t channels) {
  if (buffers_.count(name)) throw ContractError("duplicate buffer name: " + name);
  return buffers_.emplace(name, ops::BatchNormStats::fresh(channels)).first->second;
}

Tensor& ParamStore::param(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw ContractError("unknown parameter: " + name);
  return it->second;
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : params_) n += t.numel();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& [name, t] : params_) {
    auto copy = t;
    copy.zero_grad();
  }
}

Linear::Linear(ParamStore& store, const std::string& name, std::size_t in, std::size_t out, bool bias) {
  const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
  weight_ = store.create(name + ".weight", {in, out}, Init::uniform(bound));
  if (bias) bias_ = store.create(name + ".bias", {out}, Init::zeros());
}

Tensor Linear::forward(const Tensor& x) const {
  auto y = ops::matmul(x, weight_);
  return bias_.defined() ? ops::add(y, bias_) : y;
}

Conv2d::Conv2d(ParamStore& store, const std::string& name, std::size_t in, std::size_t out, std::size_t kernel,
               std::size_t stride, std::size_t padding, double bound, bool bias)
    : stride_(stride), padding_(padding) {
  if (bound < 0.0) bound = std::sqrt(6.0 / static_cast<double>(in * kernel * kernel));
  kernel_ = store.create(name + ".kernel", {out, in, kernel, kernel}, Init::uniform(bound));
  if (bias) bias_ = store.create(name + ".bias", {out}, Init::zeros());
}

Tensor Conv2d::forward(const Tensor& x) const { return ops::conv2d(x, kernel_, bias_, stride_, padding_); }

BatchNorm2d::BatchNorm2d(ParamStore& store, const std::string& name, std::size_t channels) {
  gamma_ = store.create(name + ".gamma", {channels}, Init::ones());
  beta_ = store.create(name + ".beta", {channels}, Init::zeros());
  stats_ = &store.create_stats(name + ".stats", channels);
}

Tensor BatchNorm2d::forward(const Tensor& x, ops::NormMode mode) const {
  return ops::batchnorm2d(x, gamma_, beta_, *stats_, mode, kMomentum, kEps);
}

LayerNorm::LayerNorm(ParamStore& store, const std::string& name, std::size_t width) {
  gamma_ = store.create(name + ".gamma", {width}, Init::ones());
  beta_ = store.create(name + ".beta", {width}, Init::zeros());
}

Tensor LayerNorm::forward(const Tensor& x) const { return ops::layer_norm(x, gamma_, beta_); }

}  // namespace slt
