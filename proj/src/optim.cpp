#include "oneshot/optim.hpp"

#include <cmath>

#include "oneshot/check.hpp"

namespace oneshot {

void optimizer_step(ParamSet& params, const OptConfig& cfg, int64_t& step) {
  for (auto& [name, p] : params.all())
    check(p.grad.all_finite(), "optimizer: non-finite gradient in parameter '", name, "'");
  if (cfg.kind == OptKind::sgd) {
    for (auto& [name, p] : params.all())
      for (int64_t i = 0; i < p.value.size(); ++i) p.value[i] -= cfg.lr * p.grad[i];
    ++step;
    return;
  }
  const int64_t t = step + 1;
  const float bc1 = 1.0f - std::pow(cfg.beta1, static_cast<float>(t));
  const float bc2 = 1.0f - std::pow(cfg.beta2, static_cast<float>(t));
  for (auto& [name, p] : params.all()) {
    for (int64_t i = 0; i < p.value.size(); ++i) {
      const float g = p.grad[i];
      p.m[i] = cfg.beta1 * p.m[i] + (1.0f - cfg.beta1) * g;
      p.v[i] = cfg.beta2 * p.v[i] + (1.0f - cfg.beta2) * g * g;
      const float mhat = p.m[i] / bc1;
      const float vhat = p.v[i] / bc2;
      p.value[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
  step = t;
}

GradCheckReport grad_check(ParamSet& params, const std::function<float(bool)>& f, float tol, float h,
                           int max_checks_per_param, float floor) {
  GradCheckReport report;
  f(true);  // leaves analytic grads in params
  std::map<std::string, Tensor> analytic;
  for (auto& [name, p] : params.all()) analytic.emplace(name, p.grad);
  for (auto& [name, p] : params.all()) {
    const Tensor& ag = analytic.at(name);
    const int64_t n = p.value.size();
    const int64_t step = max_checks_per_param > 0 && n > max_checks_per_param
                             ? (n + max_checks_per_param - 1) / max_checks_per_param
                             : 1;
    for (int64_t i = 0; i < n; i += step) {
      const float saved = p.value[i];
      p.value[i] = saved + h;
      const float up = f(false);
      p.value[i] = saved - h;
      const float down = f(false);
      p.value[i] = saved;
      const float numeric = (up - down) / (2.0f * h);
      const float a = ag[i];
      if (std::fabs(a) < floor && std::fabs(numeric) < floor) continue;
      const float denom = std::max({1.0f, std::fabs(a), std::fabs(numeric)});
      const float rel = std::fabs(a - numeric) / denom;
      ++report.checked;
      report.max_rel_error = std::max(report.max_rel_error, rel);
      if (rel > tol) {
        report.pass = false;
        if (report.failures.size() < 16) report.failures.push_back({name, i, a, numeric, rel});
      }
    }
  }
  return report;
}

}  // namespace oneshot
