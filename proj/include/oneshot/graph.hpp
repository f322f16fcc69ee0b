#pragma once

#include <functional>
#include <vector>

#include "oneshot/kernels.hpp"
#include "oneshot/similarity.hpp"
#include "oneshot/tensor.hpp"

namespace oneshot {

enum class BnMode { train, infer };

// Running batchnorm statistics; live outside the graph (updated as a side
// effect of train-mode forwards, never differentiated).
struct BnRunning {
  Tensor mean;
  Tensor var;
  static BnRunning init(int channels) {
    BnRunning r;
    r.mean = Tensor::zeros({channels});
    r.var = Tensor::full({channels}, 1.0f);
    return r;
  }
};

// Reverse-mode tape. Nodes are appended during the forward pass; backward
// walks the tape in reverse id order, which is a valid topological order
// because ops may only reference already-recorded nodes.
class Graph {
 public:
  int leaf(Tensor value, bool needs_grad);
  int input(Tensor value) { return leaf(std::move(value), false); }

  const Tensor& value(int id) const { return nodes_[check_id(id)].value; }
  bool needs_grad(int id) const { return nodes_[check_id(id)].needs_grad; }
  // Gradient of a node after backward(); zero tensor if it never received one.
  const Tensor& grad(int id);

  // Populates gradients for every recorded node reachable from loss.
  // Repeated calls on an identical tape are bit-identical.
  void backward(int loss_id);

  // --- ops ---
  int conv2d(int x, int k, int b);
  int maxpool2x2(int x);
  int batchnorm2d(int x, int gamma, int beta, BnRunning& running, BnMode mode, float momentum = 0.1f,
                  float eps = 1e-5f);
  int dense(int x, int w, int b);
  int activation(int x, kernels::Act kind);
  int relu(int x) { return activation(x, kernels::Act::relu); }
  int sigmoid(int x) { return activation(x, kernels::Act::sigmoid); }
  int tanh_act(int x) { return activation(x, kernels::Act::tanh); }
  int lstm(int x, int w_ih, int w_hh, int b);
  int similarity(int ref, int test, const SimilaritySpec& spec);
  int reshape(int x, std::vector<int> shape);
  int gather_rows(int x, std::vector<int> rows);
  int row(int x, int r);  // (R,C) -> (C)
  int concat_cols(int a, int b);
  int stack_scalars(const std::vector<int>& xs);
  int mean_all(int x);
  int affine(int x, float scale, float shift);
  // Scalar mean BCE against fixed targets.
  int bce(int p, Tensor targets);

  size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool needs_grad = false;
    bool has_grad = false;
    std::function<void(Graph&, int)> backward;
  };

  int check_id(int id) const;
  int add(Tensor value, std::initializer_list<int> parents, std::function<void(Graph&, int)> bw);
  Tensor& grad_ref(int id);
  bool any_needs_grad(std::initializer_list<int> ids) const;

  std::vector<Node> nodes_;
  Tensor zero_scalar_ = Tensor::zeros({1});
};

}  // namespace oneshot
