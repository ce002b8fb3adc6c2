#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "slt/ops.hpp"
#include "slt/tensor.hpp"

namespace slt {

// How a fresh parameter is filled. Uniform draws from [-scale, scale].
struct Init {
  enum class Kind { kZeros, kOnes, kConstant, kUniform } kind = Kind::kZeros;
  double scale = 0.0;

  static Init zeros() { return {Kind::kZeros, 0.0}; }
  static Init ones() { return {Kind::kOnes, 0.0}; }
  static Init constant(double v) { return {Kind::kConstant, v}; }
  static Init uniform(double bound) { return {Kind::kUniform, bound}; }
};

// Owns every named parameter and batch-norm buffer of a model. Each parameter
// is initialized from its own random stream keyed by (seed, name), so adding
// or removing a component never changes how the others are initialized.
class ParamStore {
 public:
  explicit ParamStore(std::uint64_t seed) : seed_(seed) {}
  // Layers keep pointers to buffers; copying would leave them dangling.
  ParamStore(const ParamStore&) = delete;
  ParamStore& operator=(const ParamStore&) = delete;

  Tensor create(const std::string& name, Shape shape, Init init);
  ops::BatchNormStats& create_stats(const std::string& name, std::size_t channels);

  const std::map<std::string, Tensor>& params() const { return params_; }
  std::map<std::string, ops::BatchNormStats>& buffers() { return buffers_; }
  const std::map<std::string, ops::BatchNormStats>& buffers() const { return buffers_; }

  Tensor& param(const std::string& name);
  std::size_t scalar_count() const;
  void zero_grad();
  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::map<std::string, Tensor> params_;
  std::map<std::string, ops::BatchNormStats> buffers_;
};

// y = x W + b with x: [L, in], W: [in, out].
class Linear {
 public:
  Linear() = default;
  Linear(ParamStore& store, const std::string& name, std::size_t in, std::size_t out, bool bias = true);
  Tensor forward(const Tensor& x) const;
  const Tensor& weight() const { return weight_; }
  const Tensor& bias() const { return bias_; }

 private:
  Tensor weight_;
  Tensor bias_;
};

class Conv2d {
 public:
  Conv2d() = default;
  // He-uniform initialization (suited to a following ReLU) unless `bound` is
  // given. Drop the bias when a batch norm or a softmax would cancel it.
  Conv2d(ParamStore& store, const std::string& name, std::size_t in, std::size_t out, std::size_t kernel,
         std::size_t stride, std::size_t padding, double bound = -1.0, bool bias = true);
  Tensor forward(const Tensor& x) const;
  const Tensor& kernel() const { return kernel_; }
  const Tensor& bias() const { return bias_; }
  std::size_t stride() const { return stride_; }
  std::size_t padding() const { return padding_; }

 private:
  Tensor kernel_;
  Tensor bias_;
  std::size_t stride_ = 1;
  std::size_t padding_ = 0;
};

class BatchNorm2d {
 public:
  static constexpr double kMomentum = 0.1;
  static constexpr double kEps = 1e-5;

  BatchNorm2d() = default;
  BatchNorm2d(ParamStore& store, const std::string& name, std::size_t channels);
  Tensor forward(const Tensor& x, ops::NormMode mode) const;

 private:
  Tensor gamma_;
  Tensor beta_;
  ops::BatchNormStats* stats_ = nullptr;
};

class LayerNorm {
 public:
  LayerNorm() = default;
  LayerNorm(ParamStore& store, const std::string& name, std::size_t width);
  Tensor forward(const Tensor& x) const;

 private:
  Tensor gamma_;
  Tensor beta_;
};

}  // namespace slt
