#include "oneshot/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace oneshot {

int64_t shape_numel(const std::vector<int>& shape) {
  int64_t n = 1;
  for (int d : shape) {
    if (d < 0) throw std::invalid_argument("tensor: negative dimension");
    n *= d;
  }
  return n;
}

Tensor::Tensor(std::vector<int> shape)
    : shape_(std::move(shape)), data_(static_cast<size_t>(shape_numel(shape_)), 0.0f) {}

Tensor::Tensor(std::vector<int> shape, std::vector<float> data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_numel(shape_) != static_cast<int64_t>(data_.size()))
    throw std::invalid_argument("tensor: data length " + std::to_string(data_.size()) +
                                " does not match shape " + shape_str());
}

Tensor Tensor::full(std::vector<int> shape, float v) {
  Tensor t(std::move(shape));
  t.fill(v);
  return t;
}

static size_t flat_index(const std::vector<int>& shape, std::initializer_list<int> idx) {
  if (idx.size() != shape.size()) throw std::invalid_argument("tensor: index rank mismatch");
  size_t flat = 0;
  size_t i = 0;
  for (int v : idx) {
    if (v < 0 || v >= shape[i]) throw std::out_of_range("tensor: index out of range on dim " + std::to_string(i));
    flat = flat * static_cast<size_t>(shape[i]) + static_cast<size_t>(v);
    ++i;
  }
  return flat;
}

float& Tensor::at(std::initializer_list<int> idx) { return data_[flat_index(shape_, idx)]; }
float Tensor::at(std::initializer_list<int> idx) const { return data_[flat_index(shape_, idx)]; }

Tensor Tensor::reshaped(std::vector<int> shape) const {
  if (shape_numel(shape) != size())
    throw std::invalid_argument("tensor: reshape " + shape_str() + " -> incompatible element count");
  Tensor t;
  t.shape_ = std::move(shape);
  t.data_ = data_;
  return t;
}

void Tensor::fill(float v) {
  for (auto& x : data_) x = v;
}

bool Tensor::all_finite() const {
  for (float x : data_)
    if (!std::isfinite(x)) return false;
  return true;
}

float Tensor::max_abs() const {
  float m = 0.0f;
  for (float x : data_) m = std::max(m, std::fabs(x));
  return m;
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << '(';
  for (size_t i = 0; i < shape_.size(); ++i) os << (i ? "," : "") << shape_[i];
  os << ')';
  return os.str();
}

}  // namespace oneshot
