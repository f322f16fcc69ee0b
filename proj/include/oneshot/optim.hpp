#pragma once

#include <functional>
#include <string>
#include <vector>

#include "oneshot/params.hpp"

namespace oneshot {

enum class OptKind { sgd, adam };

struct OptConfig {
  OptKind kind = OptKind::adam;
  float lr = 1e-4f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
};

// In-place update of every parameter from its gradient. step counts completed
// Adam steps and must be carried by the caller (it is serialized with the
// model). Rejects non-finite gradients, naming the parameter.
void optimizer_step(ParamSet& params, const OptConfig& cfg, int64_t& step);

// --- finite-difference gradient checking -----------------------------------

struct GradCheckAt {
  std::string param;
  int64_t index;
  float analytic;
  float numeric;
  float rel_error;
};

struct GradCheckReport {
  bool pass = true;
  float max_rel_error = 0.0f;
  int checked = 0;
  std::vector<GradCheckAt> failures;
};

// f evaluates the scalar loss from the current parameter values and, when
// fill_grads is true, leaves analytic gradients in the ParamSet. Central
// differences with step h in float32. Entries where both the analytic and
// numeric gradient are below floor are skipped (flat region / subgradient
// points). max_checks_per_param < 0 checks every element.
GradCheckReport grad_check(ParamSet& params, const std::function<float(bool fill_grads)>& f, float tol = 1e-3f,
                           float h = 1e-3f, int max_checks_per_param = -1, float floor = 1e-6f);

}  // namespace oneshot
