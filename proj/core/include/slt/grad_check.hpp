#pragma once

#include <functional>
#include <vector>

#include "slt/tensor.hpp"

namespace slt {

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_tensor = 0;   // index into the checked inputs
  std::size_t worst_element = 0;  // flat index inside that tensor
  double analytic = 0.0;
  double numeric = 0.0;
};

// Compares reverse-mode gradients of a scalar function against central finite
// differences (f(x+h) - f(x-h)) / 2h. The error for one element is
//   |analytic - numeric| / max(|analytic|, |numeric|, 1e-8)
// and the maximum over all elements of all `inputs` is reported.
//
// `f` is re-evaluated with each input element perturbed in place, so the
// inputs must be leaves that `f` reads. Throws ContractError if two
// unperturbed evaluations disagree (non-deterministic f) or f is not scalar.
GradCheckResult grad_check(const std::function<Tensor()>& f, std::vector<Tensor> inputs, double eps = 1e-6);

// Single-input form: f(x).
GradCheckResult grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double eps = 1e-6);

}  // namespace slt
