#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace slt {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

struct Node;
using NodePtr = std::shared_ptr<Node>;

// Propagates `grad_out` (the gradient w.r.t. this node's value) into the
// parents' grad buffers.
using BackwardFn = std::function<void(const std::vector<double>& grad_out)>;

// One recorded value in the computation graph.
struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until something flows into it
  bool requires_grad = false;
  std::vector<NodePtr> parents;
  BackwardFn backward;
  const char* op = "leaf";

  bool is_leaf() const noexcept { return parents.empty(); }
  // Returns the grad buffer, allocating zeros on first use.
  std::vector<double>& grad_buffer();
};

// Reference-counted handle to a graph node. Copies alias the same storage,
// matching how parameters are shared between a module and its optimizer.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(NodePtr node) : node_(std::move(node)) {}

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const noexcept { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t numel() const { return node_->value.size(); }

  std::span<const double> data() const { return node_->value; }
  // Direct write access. Only meaningful on leaves (parameters, inputs).
  std::span<double> mutable_data() { return node_->value; }
  const std::vector<double>& values() const { return node_->value; }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }
  bool has_grad() const { return !node_->grad.empty(); }
  std::span<const double> grad() const { return node_->grad; }
  std::span<double> mutable_grad() { return node_->grad_buffer(); }
  void zero_grad();

  double item() const;
  double at(std::initializer_list<std::size_t> index) const;

  // Copy of the value with no graph history.
  Tensor detach() const;

  const NodePtr& node() const noexcept { return node_; }
  const char* op() const { return node_->op; }

 private:
  NodePtr node_;
};

// Disables graph recording in the current thread while alive (evaluation).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_mode_enabled();

// Builds a result node. The backward function is attached only when grad
// mode is on and at least one parent requires a gradient.
Tensor make_result(Shape shape, std::vector<double> value, std::vector<Tensor> parents,
                   BackwardFn backward, const char* op);

// Accumulates `delta` into `parent`'s gradient if it requires one.
void accumulate_grad(const NodePtr& parent, std::span<const double> delta);

// Topologically ordered list of nodes reachable from `root` that require a
// gradient. Every node appears after all of its parents.
std::vector<Node*> computation_record(const Tensor& root);

// Reverse sweep from a scalar. Leaf gradients accumulate across calls;
// intermediate gradients are recomputed from scratch on every call.
void backward(const Tensor& loss);

}  // namespace slt
