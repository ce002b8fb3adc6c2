#include "slt/adam.hpp"

#include <cmath>

#include "slt/error.hpp"

namespace slt {

Adam::Adam(std::vector<std::pair<std::string, Tensor>> params, OptimizerConfig config)
    : params_(std::move(params)), config_(config) {
  for (const auto& [name, p] : params_) {
    state_.first_moment.emplace_back(p.numel(), 0.0);
    state_.second_moment.emplace_back(p.numel(), 0.0);
  }
}

double Adam::step() {
  double sq = 0.0;
  for (const auto& [name, p] : params_) {
    for (double g : p.grad()) {
      if (!std::isfinite(g)) throw NumericError("adam: non-finite gradient in parameter " + name);
      sq += g * g;
    }
  }
  const double norm = std::sqrt(sq);
  double clip = 1.0;
  if (config_.max_grad_norm > 0.0 && norm > config_.max_grad_norm) clip = config_.max_grad_norm / norm;

  ++state_.step;
  const double t = static_cast<double>(state_.step);
  const double c1 = 1.0 - std::pow(config_.beta1, t);
  const double c2 = 1.0 - std::pow(config_.beta2, t);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = params_[i].second;
    auto& m = state_.first_moment[i];
    auto& v = state_.second_moment[i];
    const auto g = p.grad();
    auto w = p.mutable_data();
    for (std::size_t k = 0; k < w.size(); ++k) {
      const double gk = g.empty() ? 0.0 : g[k] * clip;
      m[k] = config_.beta1 * m[k] + (1.0 - config_.beta1) * gk;
      v[k] = config_.beta2 * v[k] + (1.0 - config_.beta2) * gk * gk;
      const double mhat = m[k] / c1;
      const double vhat = v[k] / c2;
      w[k] -= config_.lr * mhat / (std::sqrt(vhat) + config_.eps);
    }
  }
  return norm;
}

void Adam::zero_grad() {
  for (auto& [name, p] : params_) p.zero_grad();
}

void Adam::load_state(AdamState state) {
  if (state.first_moment.size() != params_.size() || state.second_moment.size() != params_.size()) {
    throw ConfigError("adam: state covers " + std::to_string(state.first_moment.size()) + " parameters, optimizer has " +
                      std::to_string(params_.size()));
  }
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (state.first_moment[i].size() != params_[i].second.numel() ||
        state.second_moment[i].size() != params_[i].second.numel()) {
      throw ConfigError("adam: moment size mismatch for parameter " + params_[i].first);
    }
  }
  state_ = std::move(state);
}

}  // namespace slt
