#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "slt/config.hpp"
#include "slt/grad_check.hpp"

namespace slt {

// One named finite-difference check. `run` returns the worst result over
// all shapes the component tries.
struct GradComponent {
  std::string name;
  std::function<GradCheckResult()> run;
};

struct GradSuiteRow {
  std::string name;
  GradCheckResult result;
  bool passed = false;
  double seconds = 0.0;
};

struct GradSuiteReport {
  double tolerance = 1e-4;
  std::vector<GradSuiteRow> rows;
  bool passed() const;
  std::vector<std::string> failures() const;
};

// Every differentiable op and layer, plus the end-to-end joint loss of a toy
// model built from `config`'s switches (its geometry is shrunk so the check
// stays fast).
std::vector<GradComponent> standard_grad_components(const ModelConfig& config);

GradSuiteReport run_grad_suite(const std::vector<GradComponent>& components, double tolerance = 1e-4);
std::string grad_suite_json(const GradSuiteReport& report);

// The toy geometry used for end-to-end checks: 8x8 input, two stages, d_model 16.
ModelConfig toy_model_config(const ModelConfig& switches);

}  // namespace slt
