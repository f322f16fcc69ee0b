#pragma once

#include <map>
#include <string>

#include "oneshot/rng.hpp"
#include "oneshot/tensor.hpp"

namespace oneshot {

struct Param {
  Tensor value;
  Tensor grad;
  Tensor m;  // Adam first moment
  Tensor v;  // Adam second moment
};

// Named parameter store. Ordered map so iteration (updates, serialization,
// gradient copies) is deterministic.
class ParamSet {
 public:
  Param& add(const std::string& name, Tensor value);
  Param& get(const std::string& name);
  const Param& get(const std::string& name) const;
  bool has(const std::string& name) const { return params_.count(name) != 0; }

  std::map<std::string, Param>& all() { return params_; }
  const std::map<std::string, Param>& all() const { return params_; }
  size_t count() const { return params_.size(); }
  int64_t total_elements() const;

  void zero_grads();

 private:
  std::map<std::string, Param> params_;
};

// Kaiming-uniform for conv/dense weights: U(-sqrt(6/fan_in), +sqrt(6/fan_in)).
Tensor kaiming_uniform(Rng& rng, std::vector<int> shape, int fan_in);
// U(-bound, bound); the LSTM convention with bound = 1/sqrt(hidden).
Tensor uniform_init(Rng& rng, std::vector<int> shape, float bound);

}  // namespace oneshot
