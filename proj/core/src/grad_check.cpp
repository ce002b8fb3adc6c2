#include "slt/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "slt/error.hpp"

namespace slt {

namespace {
double scalar_of(const Tensor& t) {
  if (!t.defined() || t.numel() != 1) throw ContractError("grad_check: function must return a scalar");
  return t.item();
}
}  // namespace

GradCheckResult grad_check(const std::function<Tensor()>& f, std::vector<Tensor> inputs, double eps) {
  for (auto& x : inputs) {
    x.set_requires_grad(true);
    x.zero_grad();
  }
  const Tensor loss = f();
  const double base = scalar_of(loss);
  if (scalar_of(f()) != base) throw ContractError("grad_check: function is not deterministic");
  backward(loss);

  GradCheckResult result;
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    auto& x = inputs[t];
    const std::vector<double> analytic(x.grad().begin(), x.grad().end());
    auto data = x.mutable_data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double saved = data[i];
      auto at = [&](double offset) {
        NoGradGuard no_grad;
        data[i] = saved + offset;
        return scalar_of(f());
      };
      const double numeric = (at(eps) - at(-eps)) / (2.0 * eps);
      data[i] = saved;
      const double a = analytic.empty() ? 0.0 : analytic[i];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      const double err = std::abs(a - numeric) / denom;
      if (err > result.max_relative_error || (t == 0 && i == 0)) {
        result.max_relative_error = std::max(err, result.max_relative_error);
        result.worst_tensor = t;
        result.worst_element = i;
        result.analytic = a;
        result.numeric = numeric;
      }
    }
  }
  return result;
}

GradCheckResult grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double eps) {
  return grad_check([&] { return f(x); }, {x}, eps);
}

}  // namespace slt
