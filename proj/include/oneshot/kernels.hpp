#pragma once

#include <cstdint>
#include <vector>

#include "oneshot/tensor.hpp"

namespace oneshot::kernels {

// All kernels are pure given their inputs and use a fixed summation order, so
// repeated calls are bit-identical. conv2d additionally pins the per-pixel
// accumulation order to (kernel row, kernel column, input channel) with fused
// multiply-add steps; tests hold it to a scalar nested-loop reference bit for
// bit.

// x: (N,Ci,H,W) or (Ci,H,W); k: (Co,Ci,3,3); b: (Co) -> y: (N,Co,H,W) same padding.
Tensor conv2d_forward(const Tensor& x, const Tensor& k, const Tensor& b);
// dx may be null when the input does not need a gradient.
void conv2d_backward(const Tensor& x, const Tensor& k, const Tensor& dy, Tensor* dx, Tensor& dk, Tensor& db);

// 2x2 max pooling, stride 2, floor mode; trailing odd row/column dropped.
// argmax records the flat input offset of each winner (first in scan order on ties).
Tensor maxpool2x2_forward(const Tensor& x, std::vector<int32_t>& argmax);
void maxpool2x2_backward(const Tensor& dy, const std::vector<int32_t>& argmax, const std::vector<int>& x_shape,
                         Tensor& dx);

struct BnSaved {
  Tensor mean;     // batch mean per channel
  Tensor inv_std;  // 1/sqrt(var + eps)
};

// x: (N,C,H,W), N >= 2. Updates running stats in place with the given momentum.
Tensor bn_forward_train(const Tensor& x, const Tensor& gamma, const Tensor& beta, Tensor& running_mean,
                        Tensor& running_var, float momentum, float eps, BnSaved& saved);
// x: (N,C,H,W) or (C,H,W); uses running statistics only.
Tensor bn_forward_infer(const Tensor& x, const Tensor& gamma, const Tensor& beta, const Tensor& running_mean,
                        const Tensor& running_var, float eps);
void bn_backward(const Tensor& x, const Tensor& gamma, const BnSaved& saved, const Tensor& dy, Tensor& dx,
                 Tensor& dgamma, Tensor& dbeta);

// x: (in) or (N,in); w: (out,in); b: (out) -> (out) or (N,out).
Tensor dense_forward(const Tensor& x, const Tensor& w, const Tensor& b);
void dense_backward(const Tensor& x, const Tensor& w, const Tensor& dy, Tensor* dx, Tensor& dw, Tensor& db);

enum class Act { relu, sigmoid, tanh };
Tensor act_forward(const Tensor& x, Act kind);
// y is the forward output (all three derivatives are cheapest from y).
void act_backward(const Tensor& x, const Tensor& y, const Tensor& dy, Act kind, Tensor& dx);

struct LstmCache {
  Tensor gates;    // (T, 4h) post-nonlinearity [i f g o]
  Tensor cells;    // (T, h) cell states
  Tensor tanh_c;   // (T, h)
};

// x: (T, din); w_ih: (4h, din); w_hh: (4h, h); b: (4h). Zero initial state.
// Returns all hidden states (T, h); gate order is [input, forget, candidate, output].
Tensor lstm_forward(const Tensor& x, const Tensor& w_ih, const Tensor& w_hh, const Tensor& b, LstmCache& cache);
void lstm_backward(const Tensor& x, const Tensor& w_ih, const Tensor& w_hh, const LstmCache& cache,
                   const Tensor& hs, const Tensor& dhs, Tensor& dx, Tensor& dw_ih, Tensor& dw_hh, Tensor& db);

inline constexpr float kBceClamp = 1e-7f;

// p, y: (N); y must be exactly 0 or 1. Mean over the batch; p clamped to
// [kBceClamp, 1-kBceClamp] before the logs.
float bce_forward(const Tensor& p, const Tensor& y);
void bce_backward(const Tensor& p, const Tensor& y, float dloss, Tensor& dp);

}  // namespace oneshot::kernels
