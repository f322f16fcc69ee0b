#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

namespace oneshot {

// Dense row-major float32 tensor. Value semantics; shapes are small int vectors.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape);
  Tensor(std::vector<int> shape, std::vector<float> data);

  static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }
  static Tensor full(std::vector<int> shape, float v);
  static Tensor scalar(float v) { return Tensor({1}, {v}); }

  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
  const std::vector<int>& shape() const { return shape_; }
  int64_t size() const { return static_cast<int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  float* data() { return data_.data(); }
  const float* data() const { return data_.data(); }
  float& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  float operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

  // Multi-index access; used in tests and cold paths.
  float& at(std::initializer_list<int> idx);
  float at(std::initializer_list<int> idx) const;

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
  // Same data, new shape; element count must match.
  Tensor reshaped(std::vector<int> shape) const;

  void fill(float v);
  bool all_finite() const;
  float max_abs() const;

  std::string shape_str() const;

 private:
  std::vector<int> shape_;
  std::vector<float> data_;
};

int64_t shape_numel(const std::vector<int>& shape);

}  // namespace oneshot
