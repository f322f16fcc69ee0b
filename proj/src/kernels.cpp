#include "oneshot/kernels.hpp"

#include <cmath>
#include <cstring>

#include "oneshot/check.hpp"

#if defined(__AVX512F__)
#include <immintrin.h>
#define ONESHOT_CONV_AVX512 1
#endif

namespace oneshot::kernels {

namespace {

// Scratch buffers reused across calls. Kernels are single-threaded per model
// instance; thread_local keeps independent instances on separate threads safe.
thread_local std::vector<float> tl_xpad;
thread_local std::vector<float> tl_kpack;
thread_local std::vector<float> tl_dypad;

struct ConvDims {
  int n, ci, h, w;
};

ConvDims conv_input_dims(const Tensor& x) {
  if (x.rank() == 3) return {1, x.dim(0), x.dim(1), x.dim(2)};
  check(x.rank() == 4, "conv2d: input rank must be 3 or 4, got ", x.rank());
  return {x.dim(0), x.dim(1), x.dim(2), x.dim(3)};
}

// Pack one image plane set into a zero-padded (Ci, H+2, W+2) buffer.
void pad_image(const float* src, int ci, int h, int w, float* dst) {
  const int hp = h + 2, wp = w + 2;
  std::memset(dst, 0, sizeof(float) * static_cast<size_t>(ci) * hp * wp);
  for (int c = 0; c < ci; ++c)
    for (int r = 0; r < h; ++r)
      std::memcpy(dst + (static_cast<size_t>(c) * hp + r + 1) * wp + 1, src + (static_cast<size_t>(c) * h + r) * w,
                  sizeof(float) * static_cast<size_t>(w));
}

// Repack kernels (Co,Ci,3,3) -> [kr][kc][ci][co] so the co dimension is
// contiguous for the microkernel's broadcast loads.
void pack_kernels(const float* k, int co, int ci, float* kp) {
  for (int o = 0; o < co; ++o)
    for (int c = 0; c < ci; ++c)
      for (int kr = 0; kr < 3; ++kr)
        for (int kc = 0; kc < 3; ++kc)
          kp[((static_cast<size_t>(kr) * 3 + kc) * ci + c) * co + o] = k[((static_cast<size_t>(o) * ci + c) * 3 + kr) * 3 + kc];
}

// Same layout with the kernel spatially flipped and co/ci swapped; turns the
// input-gradient computation into a plain forward pass over padded dy.
void pack_kernels_flipped(const float* k, int co, int ci, float* kp) {
  for (int o = 0; o < co; ++o)
    for (int c = 0; c < ci; ++c)
      for (int kr = 0; kr < 3; ++kr)
        for (int kc = 0; kc < 3; ++kc)
          kp[((static_cast<size_t>(kr) * 3 + kc) * co + o) * ci + c] =
              k[((static_cast<size_t>(o) * ci + c) * 3 + (2 - kr)) * 3 + (2 - kc)];
}

#ifdef ONESHOT_CONV_AVX512

// One 4(out channel) x 16(column) output tile for row h starting at w0.
// Accumulates in registers in the mandated (kr, kc, ci) order.
template <bool Masked>
inline void conv_tile_4x16(const float* xpad, const float* kp, const float* bias, float* y, int cin, int cout, int h,
                           int w, int co0, int nc, int row, int w0, __mmask16 m) {
  const int wp = w + 2, hp = h + 2;
  const size_t plane = static_cast<size_t>(hp) * wp;
  const size_t oplane = static_cast<size_t>(h) * w;
  __m512 a0 = _mm512_set1_ps(bias[co0]);
  __m512 a1 = nc > 1 ? _mm512_set1_ps(bias[co0 + 1]) : _mm512_setzero_ps();
  __m512 a2 = nc > 2 ? _mm512_set1_ps(bias[co0 + 2]) : _mm512_setzero_ps();
  __m512 a3 = nc > 3 ? _mm512_set1_ps(bias[co0 + 3]) : _mm512_setzero_ps();
  for (int kr = 0; kr < 3; ++kr) {
    const float* xr = xpad + (static_cast<size_t>(row) + kr) * wp + w0;
    for (int kc = 0; kc < 3; ++kc) {
      const float* kk = kp + (static_cast<size_t>(kr * 3 + kc) * cin) * cout + co0;
      const float* src = xr + kc;
      for (int ci = 0; ci < cin; ++ci) {
        const __m512 xv = Masked ? _mm512_maskz_loadu_ps(m, src) : _mm512_loadu_ps(src);
        a0 = _mm512_fmadd_ps(_mm512_set1_ps(kk[0]), xv, a0);
        if (nc > 1) a1 = _mm512_fmadd_ps(_mm512_set1_ps(kk[1]), xv, a1);
        if (nc > 2) a2 = _mm512_fmadd_ps(_mm512_set1_ps(kk[2]), xv, a2);
        if (nc > 3) a3 = _mm512_fmadd_ps(_mm512_set1_ps(kk[3]), xv, a3);
        src += plane;
        kk += cout;
      }
    }
  }
  float* yr = y + (static_cast<size_t>(co0) * h + row) * w + w0;
  if (Masked) {
    _mm512_mask_storeu_ps(yr, m, a0);
    if (nc > 1) _mm512_mask_storeu_ps(yr + oplane, m, a1);
    if (nc > 2) _mm512_mask_storeu_ps(yr + 2 * oplane, m, a2);
    if (nc > 3) _mm512_mask_storeu_ps(yr + 3 * oplane, m, a3);
  } else {
    _mm512_storeu_ps(yr, a0);
    if (nc > 1) _mm512_storeu_ps(yr + oplane, a1);
    if (nc > 2) _mm512_storeu_ps(yr + 2 * oplane, a2);
    if (nc > 3) _mm512_storeu_ps(yr + 3 * oplane, a3);
  }
}

void conv_plane(const float* xpad, const float* kp, const float* bias, float* y, int cin, int cout, int h, int w) {
  const int wfull = w & ~15;
  for (int co0 = 0; co0 < cout; co0 += 4) {
    const int nc = cout - co0 < 4 ? cout - co0 : 4;
    for (int row = 0; row < h; ++row) {
      int w0 = 0;
      for (; w0 < wfull; w0 += 16) conv_tile_4x16<false>(xpad, kp, bias, y, cin, cout, h, w, co0, nc, row, w0, 0xFFFF);
      if (w0 < w)
        conv_tile_4x16<true>(xpad, kp, bias, y, cin, cout, h, w, co0, nc, row, w0,
                             static_cast<__mmask16>((1u << (w - w0)) - 1));
    }
  }
}

#else  // scalar fallback, bit-identical per output element (same fma chain)

void conv_plane(const float* xpad, const float* kp, const float* bias, float* y, int cin, int cout, int h, int w) {
  const int wp = w + 2, hp = h + 2;
  const size_t plane = static_cast<size_t>(hp) * wp;
  for (int co = 0; co < cout; ++co)
    for (int row = 0; row < h; ++row)
      for (int col = 0; col < w; ++col) {
        float acc = bias[co];
        for (int kr = 0; kr < 3; ++kr)
          for (int kc = 0; kc < 3; ++kc) {
            const float* kk = kp + (static_cast<size_t>(kr * 3 + kc) * cin) * cout + co;
            const float* src = xpad + (static_cast<size_t>(row) + kr) * wp + col + kc;
            for (int ci = 0; ci < cin; ++ci) {
              acc = std::fma(kk[0], src[0], acc);
              kk += cout;
              src += plane;
            }
          }
        y[(static_cast<size_t>(co) * h + row) * w + col] = acc;
      }
}

#endif

// Weight gradient for one image: dk[co][ci][kr][kc] += sum over pixels of
// dy[co] * xpad[ci]. A fixed 16-lane accumulator layout keeps the result
// independent of the instruction set.
void conv_dw_plane(const float* xpad, const float* dy, int cin, int cout, int h, int w, float* lanes /*co*ci*9*16*/) {
  const int wp = w + 2;
  for (int co = 0; co < cout; ++co) {
    const float* dyp = dy + static_cast<size_t>(co) * h * w;
    for (int ci = 0; ci < cin; ++ci) {
      const float* xp = xpad + static_cast<size_t>(ci) * (h + 2) * wp;
      float* lane = lanes + (static_cast<size_t>(co) * cin + ci) * 9 * 16;
#ifdef ONESHOT_CONV_AVX512
      __m512 acc[9];
      for (int i = 0; i < 9; ++i) acc[i] = _mm512_loadu_ps(lane + i * 16);
      for (int row = 0; row < h; ++row) {
        const float* dyr = dyp + static_cast<size_t>(row) * w;
        for (int w0 = 0; w0 < w; w0 += 16) {
          const int nw = w - w0 < 16 ? w - w0 : 16;
          const __mmask16 m = static_cast<__mmask16>((nw == 16) ? 0xFFFF : ((1u << nw) - 1));
          const __m512 dyv = _mm512_maskz_loadu_ps(m, dyr + w0);
          for (int kr = 0; kr < 3; ++kr) {
            const float* xr = xp + (static_cast<size_t>(row) + kr) * wp + w0;
            acc[kr * 3 + 0] = _mm512_fmadd_ps(dyv, _mm512_maskz_loadu_ps(m, xr), acc[kr * 3 + 0]);
            acc[kr * 3 + 1] = _mm512_fmadd_ps(dyv, _mm512_maskz_loadu_ps(m, xr + 1), acc[kr * 3 + 1]);
            acc[kr * 3 + 2] = _mm512_fmadd_ps(dyv, _mm512_maskz_loadu_ps(m, xr + 2), acc[kr * 3 + 2]);
          }
        }
      }
      for (int i = 0; i < 9; ++i) _mm512_storeu_ps(lane + i * 16, acc[i]);
#else
      for (int row = 0; row < h; ++row) {
        const float* dyr = dyp + static_cast<size_t>(row) * w;
        for (int w0 = 0; w0 < w; w0 += 16) {
          const int nw = w - w0 < 16 ? w - w0 : 16;
          for (int kr = 0; kr < 3; ++kr) {
            const float* xr = xp + (static_cast<size_t>(row) + kr) * wp + w0;
            for (int kc = 0; kc < 3; ++kc)
              for (int j = 0; j < nw; ++j)
                lane[(kr * 3 + kc) * 16 + j] = std::fma(dyr[w0 + j], xr[kc + j], lane[(kr * 3 + kc) * 16 + j]);
          }
        }
      }
#endif
    }
  }
}

}  // namespace

Tensor conv2d_forward(const Tensor& x, const Tensor& k, const Tensor& b) {
  const ConvDims d = conv_input_dims(x);
  check(k.rank() == 4, "conv2d: kernel rank must be 4, got ", k.rank());
  check(k.dim(2) == 3 && k.dim(3) == 3, "conv2d: kernel spatial size must be 3x3, got ", k.dim(2), "x", k.dim(3));
  check(k.dim(1) == d.ci, "conv2d: kernel input channels ", k.dim(1), " != input channels ", d.ci);
  const int cout = k.dim(0);
  check(b.rank() == 1 && b.dim(0) == cout, "conv2d: bias length ", b.shape_str(), " != output channels ", cout);

  const int hp = d.h + 2, wp = d.w + 2;
  tl_xpad.resize(static_cast<size_t>(d.ci) * hp * wp);
  tl_kpack.resize(static_cast<size_t>(cout) * d.ci * 9);
  pack_kernels(k.data(), cout, d.ci, tl_kpack.data());

  std::vector<int> yshape = x.rank() == 3 ? std::vector<int>{cout, d.h, d.w} : std::vector<int>{d.n, cout, d.h, d.w};
  Tensor y(std::move(yshape));
  const size_t in_sz = static_cast<size_t>(d.ci) * d.h * d.w;
  const size_t out_sz = static_cast<size_t>(cout) * d.h * d.w;
  for (int n = 0; n < d.n; ++n) {
    pad_image(x.data() + n * in_sz, d.ci, d.h, d.w, tl_xpad.data());
    conv_plane(tl_xpad.data(), tl_kpack.data(), b.data(), y.data() + n * out_sz, d.ci, cout, d.h, d.w);
  }
  return y;
}

void conv2d_backward(const Tensor& x, const Tensor& k, const Tensor& dy, Tensor* dx, Tensor& dk, Tensor& db) {
  const ConvDims d = conv_input_dims(x);
  const int cout = k.dim(0);
  check(dy.size() == static_cast<int64_t>(d.n) * cout * d.h * d.w, "conv2d backward: dy shape ", dy.shape_str(),
        " does not match output");
  dk = Tensor::zeros({cout, d.ci, 3, 3});
  db = Tensor::zeros({cout});

  const size_t in_sz = static_cast<size_t>(d.ci) * d.h * d.w;
  const size_t out_sz = static_cast<size_t>(cout) * d.h * d.w;
  const int hp = d.h + 2, wp = d.w + 2;

  // Bias gradient: plain ordered sums per output channel.
  for (int n = 0; n < d.n; ++n)
    for (int co = 0; co < cout; ++co) {
      const float* p = dy.data() + n * out_sz + static_cast<size_t>(co) * d.h * d.w;
      float acc = db[co];
      for (int i = 0; i < d.h * d.w; ++i) acc += p[i];
      db[co] = acc;
    }

  // Weight gradient via persistent 16-lane accumulators across the batch.
  std::vector<float> lanes(static_cast<size_t>(cout) * d.ci * 9 * 16, 0.0f);
  tl_xpad.resize(static_cast<size_t>(d.ci) * hp * wp);
  for (int n = 0; n < d.n; ++n) {
    pad_image(x.data() + n * in_sz, d.ci, d.h, d.w, tl_xpad.data());
    conv_dw_plane(tl_xpad.data(), dy.data() + n * out_sz, d.ci, cout, d.h, d.w, lanes.data());
  }
  for (int co = 0; co < cout; ++co)
    for (int ci = 0; ci < d.ci; ++ci)
      for (int kr = 0; kr < 3; ++kr)
        for (int kc = 0; kc < 3; ++kc) {
          const float* lane = lanes.data() + ((static_cast<size_t>(co) * d.ci + ci) * 9 + (kr * 3 + kc)) * 16;
          float acc = 0.0f;
          for (int j = 0; j < 16; ++j) acc += lane[j];
          dk[((static_cast<size_t>(co) * d.ci + ci) * 3 + kr) * 3 + kc] = acc;
        }

  // Input gradient = forward pass of padded dy with flipped, transposed kernels.
  if (dx) {
    *dx = Tensor::zeros(x.shape());
    tl_dypad.resize(static_cast<size_t>(cout) * hp * wp);
    tl_kpack.resize(static_cast<size_t>(cout) * d.ci * 9);
    pack_kernels_flipped(k.data(), cout, d.ci, tl_kpack.data());
    std::vector<float> zero_bias(static_cast<size_t>(d.ci), 0.0f);
    for (int n = 0; n < d.n; ++n) {
      pad_image(dy.data() + n * out_sz, cout, d.h, d.w, tl_dypad.data());
      conv_plane(tl_dypad.data(), tl_kpack.data(), zero_bias.data(), dx->data() + n * in_sz, cout, d.ci, d.h, d.w);
    }
  }
}

Tensor maxpool2x2_forward(const Tensor& x, std::vector<int32_t>& argmax) {
  const ConvDims d = conv_input_dims(x);
  check(d.h >= 2 && d.w >= 2, "maxpool2x2: spatial size must be at least 2x2, got ", d.h, "x", d.w);
  const int oh = d.h / 2, ow = d.w / 2;
  std::vector<int> yshape = x.rank() == 3 ? std::vector<int>{d.ci, oh, ow} : std::vector<int>{d.n, d.ci, oh, ow};
  Tensor y(std::move(yshape));
  argmax.assign(static_cast<size_t>(y.size()), 0);
  const float* src = x.data();
  float* dst = y.data();
  int64_t oi = 0;
  for (int n = 0; n < d.n; ++n)
    for (int c = 0; c < d.ci; ++c) {
      const size_t base = (static_cast<size_t>(n) * d.ci + c) * d.h * d.w;
      for (int r = 0; r < oh; ++r)
        for (int col = 0; col < ow; ++col) {
          const size_t i00 = base + static_cast<size_t>(2 * r) * d.w + 2 * col;
          size_t best = i00;
          float v = src[i00];
          // first-found wins on ties: scan order (0,0) (0,1) (1,0) (1,1)
          if (src[i00 + 1] > v) { v = src[i00 + 1]; best = i00 + 1; }
          if (src[i00 + d.w] > v) { v = src[i00 + d.w]; best = i00 + d.w; }
          if (src[i00 + d.w + 1] > v) { v = src[i00 + d.w + 1]; best = i00 + d.w + 1; }
          dst[oi] = v;
          argmax[static_cast<size_t>(oi)] = static_cast<int32_t>(best);
          ++oi;
        }
    }
  return y;
}

void maxpool2x2_backward(const Tensor& dy, const std::vector<int32_t>& argmax, const std::vector<int>& x_shape,
                         Tensor& dx) {
  dx = Tensor::zeros(x_shape);
  check(static_cast<size_t>(dy.size()) == argmax.size(), "maxpool2x2 backward: argmax/dy size mismatch");
  for (int64_t i = 0; i < dy.size(); ++i) dx[argmax[static_cast<size_t>(i)]] += dy[i];
}

Tensor bn_forward_train(const Tensor& x, const Tensor& gamma, const Tensor& beta, Tensor& running_mean,
                        Tensor& running_var, float momentum, float eps, BnSaved& saved) {
  check(x.rank() == 4, "batchnorm train: input must be batched (N,C,H,W), got rank ", x.rank());
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  check(n >= 2, "batchnorm train: batch size must be >= 2 (variance undefined), got ", n);
  check(gamma.size() == c && beta.size() == c, "batchnorm: gamma/beta length must equal channels ", c);
  const int64_t m = static_cast<int64_t>(n) * h * w;
  saved.mean = Tensor::zeros({c});
  saved.inv_std = Tensor::zeros({c});
  Tensor y(x.shape());
  const size_t plane = static_cast<size_t>(h) * w;
  for (int ch = 0; ch < c; ++ch) {
    double sum = 0.0;
    for (int b = 0; b < n; ++b) {
      const float* p = x.data() + (static_cast<size_t>(b) * c + ch) * plane;
      for (size_t i = 0; i < plane; ++i) sum += p[i];
    }
    const float mean = static_cast<float>(sum / static_cast<double>(m));
    double sq = 0.0;
    for (int b = 0; b < n; ++b) {
      const float* p = x.data() + (static_cast<size_t>(b) * c + ch) * plane;
      for (size_t i = 0; i < plane; ++i) {
        const double dvi = static_cast<double>(p[i]) - mean;
        sq += dvi * dvi;
      }
    }
    const float var = static_cast<float>(sq / static_cast<double>(m));  // biased, as the batch statistic
    const float inv_std = 1.0f / std::sqrt(var + eps);
    saved.mean[ch] = mean;
    saved.inv_std[ch] = inv_std;
    running_mean[ch] = (1.0f - momentum) * running_mean[ch] + momentum * mean;
    running_var[ch] = (1.0f - momentum) * running_var[ch] + momentum * var;
    const float g = gamma[ch], bt = beta[ch];
    for (int b = 0; b < n; ++b) {
      const float* p = x.data() + (static_cast<size_t>(b) * c + ch) * plane;
      float* q = y.data() + (static_cast<size_t>(b) * c + ch) * plane;
      for (size_t i = 0; i < plane; ++i) q[i] = g * ((p[i] - mean) * inv_std) + bt;
    }
  }
  return y;
}

Tensor bn_forward_infer(const Tensor& x, const Tensor& gamma, const Tensor& beta, const Tensor& running_mean,
                        const Tensor& running_var, float eps) {
  const ConvDims d = conv_input_dims(x);
  check(gamma.size() == d.ci, "batchnorm: gamma length must equal channels ", d.ci);
  Tensor y(x.shape());
  const size_t plane = static_cast<size_t>(d.h) * d.w;
  for (int b = 0; b < d.n; ++b)
    for (int ch = 0; ch < d.ci; ++ch) {
      const float inv_std = 1.0f / std::sqrt(running_var[ch] + eps);
      const float g = gamma[ch], bt = beta[ch], mean = running_mean[ch];
      const float* p = x.data() + (static_cast<size_t>(b) * d.ci + ch) * plane;
      float* q = y.data() + (static_cast<size_t>(b) * d.ci + ch) * plane;
      for (size_t i = 0; i < plane; ++i) q[i] = g * ((p[i] - mean) * inv_std) + bt;
    }
  return y;
}

void bn_backward(const Tensor& x, const Tensor& gamma, const BnSaved& saved, const Tensor& dy, Tensor& dx,
                 Tensor& dgamma, Tensor& dbeta) {
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const size_t plane = static_cast<size_t>(h) * w;
  const double m = static_cast<double>(n) * h * w;
  dx = Tensor::zeros(x.shape());
  dgamma = Tensor::zeros({c});
  dbeta = Tensor::zeros({c});
  for (int ch = 0; ch < c; ++ch) {
    const float mean = saved.mean[ch], inv_std = saved.inv_std[ch], g = gamma[ch];
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (int b = 0; b < n; ++b) {
      const float* xp = x.data() + (static_cast<size_t>(b) * c + ch) * plane;
      const float* dp = dy.data() + (static_cast<size_t>(b) * c + ch) * plane;
      for (size_t i = 0; i < plane; ++i) {
        const double xhat = (static_cast<double>(xp[i]) - mean) * inv_std;
        sum_dy += dp[i];
        sum_dy_xhat += dp[i] * xhat;
      }
    }
    dgamma[ch] = static_cast<float>(sum_dy_xhat);
    dbeta[ch] = static_cast<float>(sum_dy);
    const float k1 = static_cast<float>(sum_dy / m);
    const float k2 = static_cast<float>(sum_dy_xhat / m);
    for (int b = 0; b < n; ++b) {
      const float* xp = x.data() + (static_cast<size_t>(b) * c + ch) * plane;
      const float* dp = dy.data() + (static_cast<size_t>(b) * c + ch) * plane;
      float* q = dx.data() + (static_cast<size_t>(b) * c + ch) * plane;
      for (size_t i = 0; i < plane; ++i) {
        const float xhat = (xp[i] - mean) * inv_std;
        q[i] = g * inv_std * (dp[i] - k1 - xhat * k2);
      }
    }
  }
}

namespace {

// Canonical 16-lane split reduction for dot products: identical arithmetic on
// every instruction set (lanes then a sequential combine).
inline float dot_lanes(const float* a, const float* b, int n) {
#ifdef ONESHOT_CONV_AVX512
  __m512 acc = _mm512_setzero_ps();
  int i = 0;
  for (; i + 16 <= n; i += 16) acc = _mm512_fmadd_ps(_mm512_loadu_ps(a + i), _mm512_loadu_ps(b + i), acc);
  if (i < n) {
    const __mmask16 m = static_cast<__mmask16>((1u << (n - i)) - 1);
    acc = _mm512_fmadd_ps(_mm512_maskz_loadu_ps(m, a + i), _mm512_maskz_loadu_ps(m, b + i), acc);
  }
  alignas(64) float lane[16];
  _mm512_store_ps(lane, acc);
#else
  float lane[16] = {0};
  for (int i = 0; i < n; i += 16) {
    const int nw = n - i < 16 ? n - i : 16;
    for (int j = 0; j < nw; ++j) lane[j] = std::fma(a[i + j], b[i + j], lane[j]);
  }
#endif
  float s = 0.0f;
  for (int j = 0; j < 16; ++j) s += lane[j];
  return s;
}

}  // namespace

Tensor dense_forward(const Tensor& x, const Tensor& w, const Tensor& b) {
  check(w.rank() == 2, "dense: weight rank must be 2, got ", w.rank());
  const int out = w.dim(0), in = w.dim(1);
  check(b.rank() == 1 && b.dim(0) == out, "dense: bias length ", b.shape_str(), " != output size ", out);
  const bool batched = x.rank() == 2;
  check(batched || x.rank() == 1, "dense: input rank must be 1 or 2, got ", x.rank());
  const int n = batched ? x.dim(0) : 1;
  const int xin = batched ? x.dim(1) : x.dim(0);
  check(xin == in, "dense: input size ", xin, " != weight input size ", in);
  Tensor y(batched ? std::vector<int>{n, out} : std::vector<int>{out});
  for (int r = 0; r < n; ++r) {
    const float* xp = x.data() + static_cast<size_t>(r) * in;
    float* yp = y.data() + static_cast<size_t>(r) * out;
    for (int o = 0; o < out; ++o) yp[o] = b[o] + dot_lanes(w.data() + static_cast<size_t>(o) * in, xp, in);
  }
  return y;
}

void dense_backward(const Tensor& x, const Tensor& w, const Tensor& dy, Tensor* dx, Tensor& dw, Tensor& db) {
  const int out = w.dim(0), in = w.dim(1);
  const bool batched = x.rank() == 2;
  const int n = batched ? x.dim(0) : 1;
  dw = Tensor::zeros(w.shape());
  db = Tensor::zeros({out});
  for (int o = 0; o < out; ++o) {
    float acc = 0.0f;
    for (int r = 0; r < n; ++r) acc += dy[static_cast<size_t>(r) * out + o];
    db[o] = acc;
  }
  for (int o = 0; o < out; ++o) {
    float* dwp = dw.data() + static_cast<size_t>(o) * in;
    for (int r = 0; r < n; ++r) {
      const float g = dy[static_cast<size_t>(r) * out + o];
      const float* xp = x.data() + static_cast<size_t>(r) * in;
      for (int i = 0; i < in; ++i) dwp[i] = std::fma(g, xp[i], dwp[i]);
    }
  }
  if (dx) {
    *dx = Tensor::zeros(x.shape());
    for (int r = 0; r < n; ++r) {
      float* dxp = dx->data() + static_cast<size_t>(r) * in;
      for (int o = 0; o < out; ++o) {
        const float g = dy[static_cast<size_t>(r) * out + o];
        const float* wp = w.data() + static_cast<size_t>(o) * in;
        for (int i = 0; i < in; ++i) dxp[i] = std::fma(g, wp[i], dxp[i]);
      }
    }
  }
}

namespace {
// Pre-activation clamp keeps float32 sigmoid strictly inside (0,1).
inline float sigmoid_clamped(float x) {
  const float xc = x > 15.0f ? 15.0f : (x < -15.0f ? -15.0f : x);
  return 1.0f / (1.0f + std::exp(-xc));
}
}  // namespace

Tensor act_forward(const Tensor& x, Act kind) {
  Tensor y(x.shape());
  const int64_t n = x.size();
  switch (kind) {
    case Act::relu:
      for (int64_t i = 0; i < n; ++i) y[i] = x[i] > 0.0f ? x[i] : 0.0f;
      break;
    case Act::sigmoid:
      for (int64_t i = 0; i < n; ++i) y[i] = sigmoid_clamped(x[i]);
      break;
    case Act::tanh:
      for (int64_t i = 0; i < n; ++i) y[i] = std::tanh(x[i]);
      break;
  }
  return y;
}

void act_backward(const Tensor& x, const Tensor& y, const Tensor& dy, Act kind, Tensor& dx) {
  dx = Tensor::zeros(x.shape());
  const int64_t n = x.size();
  switch (kind) {
    case Act::relu:
      for (int64_t i = 0; i < n; ++i) dx[i] = x[i] > 0.0f ? dy[i] : 0.0f;
      break;
    case Act::sigmoid:
      for (int64_t i = 0; i < n; ++i) dx[i] = dy[i] * y[i] * (1.0f - y[i]);
      break;
    case Act::tanh:
      for (int64_t i = 0; i < n; ++i) dx[i] = dy[i] * (1.0f - y[i] * y[i]);
      break;
  }
}

Tensor lstm_forward(const Tensor& x, const Tensor& w_ih, const Tensor& w_hh, const Tensor& b, LstmCache& cache) {
  check(x.rank() == 2 && x.dim(0) >= 1, "lstm: input must be (T,d) with T >= 1, got ", x.shape_str());
  const int t_len = x.dim(0), din = x.dim(1);
  check(w_ih.rank() == 2 && w_ih.dim(1) == din, "lstm: w_ih shape ", w_ih.shape_str(), " incompatible with input ",
        x.shape_str());
  const int hh = w_ih.dim(0) / 4;
  check(w_ih.dim(0) == 4 * hh && w_hh.rank() == 2 && w_hh.dim(0) == 4 * hh && w_hh.dim(1) == hh,
        "lstm: w_hh shape ", w_hh.shape_str(), " incompatible with hidden size ", hh);
  check(b.size() == 4 * hh, "lstm: bias length ", b.size(), " != ", 4 * hh);

  Tensor hs({t_len, hh});
  cache.gates = Tensor::zeros({t_len, 4 * hh});
  cache.cells = Tensor::zeros({t_len, hh});
  cache.tanh_c = Tensor::zeros({t_len, hh});
  std::vector<float> pre(static_cast<size_t>(4) * hh);
  std::vector<float> h_prev(static_cast<size_t>(hh), 0.0f), c_prev(static_cast<size_t>(hh), 0.0f);
  for (int t = 0; t < t_len; ++t) {
    const float* xt = x.data() + static_cast<size_t>(t) * din;
    for (int r = 0; r < 4 * hh; ++r) {
      float acc = b[r];
      const float* wi = w_ih.data() + static_cast<size_t>(r) * din;
      for (int i = 0; i < din; ++i) acc = std::fma(wi[i], xt[i], acc);
      const float* wh = w_hh.data() + static_cast<size_t>(r) * hh;
      for (int i = 0; i < hh; ++i) acc = std::fma(wh[i], h_prev[static_cast<size_t>(i)], acc);
      pre[static_cast<size_t>(r)] = acc;
    }
    float* gates = cache.gates.data() + static_cast<size_t>(t) * 4 * hh;
    float* ct = cache.cells.data() + static_cast<size_t>(t) * hh;
    float* tc = cache.tanh_c.data() + static_cast<size_t>(t) * hh;
    float* ht = hs.data() + static_cast<size_t>(t) * hh;
    for (int i = 0; i < hh; ++i) {
      const float gi = sigmoid_clamped(pre[static_cast<size_t>(i)]);
      const float gf = sigmoid_clamped(pre[static_cast<size_t>(hh + i)]);
      const float gg = std::tanh(pre[static_cast<size_t>(2 * hh + i)]);
      const float go = sigmoid_clamped(pre[static_cast<size_t>(3 * hh + i)]);
      gates[i] = gi;
      gates[hh + i] = gf;
      gates[2 * hh + i] = gg;
      gates[3 * hh + i] = go;
      const float c = gf * c_prev[static_cast<size_t>(i)] + gi * gg;
      ct[i] = c;
      tc[i] = std::tanh(c);
      ht[i] = go * tc[i];
    }
    std::memcpy(h_prev.data(), ht, sizeof(float) * static_cast<size_t>(hh));
    std::memcpy(c_prev.data(), ct, sizeof(float) * static_cast<size_t>(hh));
  }
  return hs;
}

void lstm_backward(const Tensor& x, const Tensor& w_ih, const Tensor& w_hh, const LstmCache& cache, const Tensor& hs,
                   const Tensor& dhs, Tensor& dx, Tensor& dw_ih, Tensor& dw_hh, Tensor& db) {
  const int t_len = x.dim(0), din = x.dim(1);
  const int hh = w_ih.dim(0) / 4;
  dx = Tensor::zeros(x.shape());
  dw_ih = Tensor::zeros(w_ih.shape());
  dw_hh = Tensor::zeros(w_hh.shape());
  db = Tensor::zeros({4 * hh});
  std::vector<float> dh(static_cast<size_t>(hh), 0.0f), dc(static_cast<size_t>(hh), 0.0f);
  std::vector<float> dpre(static_cast<size_t>(4) * hh);
  for (int t = t_len - 1; t >= 0; --t) {
    const float* gates = cache.gates.data() + static_cast<size_t>(t) * 4 * hh;
    const float* tc = cache.tanh_c.data() + static_cast<size_t>(t) * hh;
    const float* c_prev = t > 0 ? cache.cells.data() + static_cast<size_t>(t - 1) * hh : nullptr;
    const float* h_prev = t > 0 ? hs.data() + static_cast<size_t>(t - 1) * hh : nullptr;
    for (int i = 0; i < hh; ++i) dh[static_cast<size_t>(i)] += dhs[static_cast<size_t>(t) * hh + i];
    for (int i = 0; i < hh; ++i) {
      const float gi = gates[i], gf = gates[hh + i], gg = gates[2 * hh + i], go = gates[3 * hh + i];
      const float dgo = dh[static_cast<size_t>(i)] * tc[i];
      const float dct = dc[static_cast<size_t>(i)] + dh[static_cast<size_t>(i)] * go * (1.0f - tc[i] * tc[i]);
      const float dgi = dct * gg;
      const float dgg = dct * gi;
      const float dgf = c_prev ? dct * c_prev[i] : 0.0f;
      dc[static_cast<size_t>(i)] = dct * gf;
      dpre[static_cast<size_t>(i)] = dgi * gi * (1.0f - gi);
      dpre[static_cast<size_t>(hh + i)] = dgf * gf * (1.0f - gf);
      dpre[static_cast<size_t>(2 * hh + i)] = dgg * (1.0f - gg * gg);
      dpre[static_cast<size_t>(3 * hh + i)] = dgo * go * (1.0f - go);
    }
    const float* xt = x.data() + static_cast<size_t>(t) * din;
    float* dxt = dx.data() + static_cast<size_t>(t) * din;
    std::fill(dh.begin(), dh.end(), 0.0f);
    for (int r = 0; r < 4 * hh; ++r) {
      const float g = dpre[static_cast<size_t>(r)];
      db[r] += g;
      float* dwi = dw_ih.data() + static_cast<size_t>(r) * din;
      const float* wi = w_ih.data() + static_cast<size_t>(r) * din;
      for (int i = 0; i < din; ++i) {
        dwi[i] = std::fma(g, xt[i], dwi[i]);
        dxt[i] = std::fma(g, wi[i], dxt[i]);
      }
      float* dwh = dw_hh.data() + static_cast<size_t>(r) * hh;
      const float* wh = w_hh.data() + static_cast<size_t>(r) * hh;
      for (int i = 0; i < hh; ++i) {
        if (h_prev) dwh[i] = std::fma(g, h_prev[i], dwh[i]);
        dh[static_cast<size_t>(i)] = std::fma(g, wh[i], dh[static_cast<size_t>(i)]);
      }
    }
  }
}

float bce_forward(const Tensor& p, const Tensor& y) {
  check(p.size() == y.size(), "bce: prediction/target size mismatch ", p.size(), " vs ", y.size());
  check(p.size() >= 1, "bce: empty batch");
  double acc = 0.0;
  for (int64_t i = 0; i < p.size(); ++i) {
    const float yi = y[i];
    check(yi == 0.0f || yi == 1.0f, "bce: target must be exactly 0 or 1, got ", yi, " at index ", i);
    float pc = p[i];
    pc = pc < kBceClamp ? kBceClamp : (pc > 1.0f - kBceClamp ? 1.0f - kBceClamp : pc);
    acc -= yi == 1.0f ? std::log(static_cast<double>(pc)) : std::log(1.0 - static_cast<double>(pc));
  }
  return static_cast<float>(acc / static_cast<double>(p.size()));
}

void bce_backward(const Tensor& p, const Tensor& y, float dloss, Tensor& dp) {
  dp = Tensor::zeros(p.shape());
  const float inv_n = 1.0f / static_cast<float>(p.size());
  for (int64_t i = 0; i < p.size(); ++i) {
    const float pi = p[i];
    if (pi < kBceClamp || pi > 1.0f - kBceClamp) continue;  // clamped region: zero gradient
    dp[i] = dloss * inv_n * (y[i] == 1.0f ? -1.0f / pi : 1.0f / (1.0f - pi));
  }
}

}  // namespace oneshot::kernels
