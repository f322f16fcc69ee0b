#include "oneshot/params.hpp"

#include <cmath>

#include "oneshot/check.hpp"

namespace oneshot {

Param& ParamSet::add(const std::string& name, Tensor value) {
  check(!has(name), "params: duplicate parameter name '", name, "'");
  Param p;
  p.grad = Tensor::zeros(value.shape());
  p.m = Tensor::zeros(value.shape());
  p.v = Tensor::zeros(value.shape());
  p.value = std::move(value);
  auto [it, inserted] = params_.emplace(name, std::move(p));
  return it->second;
}

Param& ParamSet::get(const std::string& name) {
  auto it = params_.find(name);
  check(it != params_.end(), "params: unknown parameter '", name, "'");
  return it->second;
}

const Param& ParamSet::get(const std::string& name) const {
  auto it = params_.find(name);
  check(it != params_.end(), "params: unknown parameter '", name, "'");
  return it->second;
}

int64_t ParamSet::total_elements() const {
  int64_t n = 0;
  for (const auto& [name, p] : params_) n += p.value.size();
  return n;
}

void ParamSet::zero_grads() {
  for (auto& [name, p] : params_) p.grad.fill(0.0f);
}

Tensor kaiming_uniform(Rng& rng, std::vector<int> shape, int fan_in) {
  const float bound = std::sqrt(6.0f / static_cast<float>(fan_in));
  return uniform_init(rng, std::move(shape), bound);
}

Tensor uniform_init(Rng& rng, std::vector<int> shape, float bound) {
  Tensor t(std::move(shape));
  for (int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-bound, bound);
  return t;
}

}  // namespace oneshot
