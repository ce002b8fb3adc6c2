#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "slt/config.hpp"
#include "slt/tensor.hpp"

namespace slt {

// Per-parameter Adam moments plus the shared step counter.
struct AdamState {
  std::uint64_t step = 0;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
};

// Adam with bias-corrected moments:
//   m <- b1 m + (1-b1) g,  v <- b2 v + (1-b2) g^2
//   p <- p - lr * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps)
// Parameters whose gradient was never populated are treated as having a
// zero gradient.
class Adam {
 public:
  Adam(std::vector<std::pair<std::string, Tensor>> params, OptimizerConfig config);

  // Throws NumericError (leaving parameters and state untouched) if any
  // gradient is non-finite. Returns the global gradient norm before clipping.
  double step();
  void zero_grad();

  const AdamState& state() const { return state_; }
  // Replaces the state (checkpoint resume); shapes must match.
  void load_state(AdamState state);
  const std::vector<std::pair<std::string, Tensor>>& params() const { return params_; }

 private:
  std::vector<std::pair<std::string, Tensor>> params_;
  OptimizerConfig config_;
  AdamState state_;
};

}  // namespace slt
