#include "oneshot/graph.hpp"

#include <cmath>
#include <cstring>
#include <memory>

#include "oneshot/check.hpp"

namespace oneshot {

int Graph::check_id(int id) const {
  check(id >= 0 && id < static_cast<int>(nodes_.size()), "graph: node ", id, " is not recorded on this tape");
  return id;
}

int Graph::leaf(Tensor value, bool needs_grad) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = needs_grad;
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

bool Graph::any_needs_grad(std::initializer_list<int> ids) const {
  for (int id : ids)
    if (id >= 0 && nodes_[static_cast<size_t>(id)].needs_grad) return true;
  return false;
}

int Graph::add(Tensor value, std::initializer_list<int> parents, std::function<void(Graph&, int)> bw) {
  for (int p : parents)
    if (p >= 0) check_id(p);
  Node n;
  n.value = std::move(value);
  n.needs_grad = any_needs_grad(parents);
  if (n.needs_grad) n.backward = std::move(bw);
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

Tensor& Graph::grad_ref(int id) {
  Node& n = nodes_[static_cast<size_t>(check_id(id))];
  if (!n.has_grad) {
    n.grad = Tensor::zeros(n.value.shape());
    n.has_grad = true;
  }
  return n.grad;
}

const Tensor& Graph::grad(int id) {
  Node& n = nodes_[static_cast<size_t>(check_id(id))];
  if (!n.has_grad) {
    n.grad = Tensor::zeros(n.value.shape());
    n.has_grad = true;
  }
  return n.grad;
}

void Graph::backward(int loss_id) {
  check_id(loss_id);
  check(nodes_[static_cast<size_t>(loss_id)].value.size() == 1, "graph: backward target must be scalar, got shape ",
        nodes_[static_cast<size_t>(loss_id)].value.shape_str());
  for (auto& n : nodes_) {
    if (n.has_grad) n.grad.fill(0.0f);
  }
  grad_ref(loss_id)[0] = 1.0f;
  for (int id = loss_id; id >= 0; --id) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (!n.needs_grad || !n.backward || !n.has_grad) continue;
    n.backward(*this, id);
  }
}

int Graph::conv2d(int x, int k, int b) {
  Tensor y = kernels::conv2d_forward(value(x), value(k), value(b));
  return add(std::move(y), {x, k, b}, [x, k, b](Graph& g, int self) {
    Tensor dx, dk, db;
    const bool need_dx = g.nodes_[static_cast<size_t>(x)].needs_grad;
    kernels::conv2d_backward(g.value(x), g.value(k), g.grad(self), need_dx ? &dx : nullptr, dk, db);
    if (need_dx) {
      Tensor& gx = g.grad_ref(x);
      for (int64_t i = 0; i < gx.size(); ++i) gx[i] += dx[i];
    }
    if (g.nodes_[static_cast<size_t>(k)].needs_grad) {
      Tensor& gk = g.grad_ref(k);
      for (int64_t i = 0; i < gk.size(); ++i) gk[i] += dk[i];
    }
    if (g.nodes_[static_cast<size_t>(b)].needs_grad) {
      Tensor& gb = g.grad_ref(b);
      for (int64_t i = 0; i < gb.size(); ++i) gb[i] += db[i];
    }
  });
}

int Graph::maxpool2x2(int x) {
  auto argmax = std::make_shared<std::vector<int32_t>>();
  Tensor y = kernels::maxpool2x2_forward(value(x), *argmax);
  return add(std::move(y), {x}, [x, argmax](Graph& g, int self) {
    Tensor dx;
    kernels::maxpool2x2_backward(g.grad(self), *argmax, g.value(x).shape(), dx);
    Tensor& gx = g.grad_ref(x);
    for (int64_t i = 0; i < gx.size(); ++i) gx[i] += dx[i];
  });
}

int Graph::batchnorm2d(int x, int gamma, int beta, BnRunning& running, BnMode mode, float momentum, float eps) {
  if (mode == BnMode::infer) {
    Tensor y = kernels::bn_forward_infer(value(x), value(gamma), value(beta), running.mean, running.var, eps);
    // Inference-mode normalization is a per-channel affine map.
    auto scale = std::make_shared<Tensor>(Tensor::zeros({value(gamma).dim(0)}));
    for (int c = 0; c < scale->dim(0); ++c)
      (*scale)[c] = value(gamma)[c] / std::sqrt(running.var[c] + eps);
    auto mean = std::make_shared<Tensor>(running.mean);
    auto var = std::make_shared<Tensor>(running.var);
    const float eps_c = eps;
    return add(std::move(y), {x, gamma, beta}, [x, gamma, beta, scale, mean, var, eps_c](Graph& g, int self) {
      const Tensor& dy = g.grad(self);
      const Tensor& xv = g.value(x);
      const int c = scale->dim(0);
      const int rank = xv.rank();
      const int n = rank == 4 ? xv.dim(0) : 1;
      const size_t plane = static_cast<size_t>(xv.dim(rank - 2)) * xv.dim(rank - 1);
      if (g.nodes_[static_cast<size_t>(x)].needs_grad) {
        Tensor& gx = g.grad_ref(x);
        for (int bb = 0; bb < n; ++bb)
          for (int ch = 0; ch < c; ++ch) {
            const float s = (*scale)[ch];
            const float* dp = dy.data() + (static_cast<size_t>(bb) * c + ch) * plane;
            float* q = gx.data() + (static_cast<size_t>(bb) * c + ch) * plane;
            for (size_t i = 0; i < plane; ++i) q[i] += s * dp[i];
          }
      }
      if (g.nodes_[static_cast<size_t>(gamma)].needs_grad) {
        Tensor& gg = g.grad_ref(gamma);
        Tensor& gb = g.grad_ref(beta);
        for (int ch = 0; ch < c; ++ch) {
          const float inv_std = 1.0f / std::sqrt((*var)[ch] + eps_c);
          double sg = 0.0, sb = 0.0;
          for (int bb = 0; bb < n; ++bb) {
            const float* dp = dy.data() + (static_cast<size_t>(bb) * c + ch) * plane;
            const float* xp = xv.data() + (static_cast<size_t>(bb) * c + ch) * plane;
            for (size_t i = 0; i < plane; ++i) {
              sg += dp[i] * ((xp[i] - (*mean)[ch]) * inv_std);
              sb += dp[i];
            }
          }
          gg[ch] += static_cast<float>(sg);
          gb[ch] += static_cast<float>(sb);
        }
      }
    });
  }
  auto saved = std::make_shared<kernels::BnSaved>();
  Tensor y = kernels::bn_forward_train(value(x), value(gamma), value(beta), running.mean, running.var, momentum, eps,
                                       *saved);
  return add(std::move(y), {x, gamma, beta}, [x, gamma, beta, saved](Graph& g, int self) {
    Tensor dx, dgamma, dbeta;
    kernels::bn_backward(g.value(x), g.value(gamma), *saved, g.grad(self), dx, dgamma, dbeta);
    if (g.nodes_[static_cast<size_t>(x)].needs_grad) {
      Tensor& gx = g.grad_ref(x);
      for (int64_t i = 0; i < gx.size(); ++i) gx[i] += dx[i];
    }
    if (g.nodes_[static_cast<size_t>(gamma)].needs_grad) {
      Tensor& gg = g.grad_ref(gamma);
      for (int64_t i = 0; i < gg.size(); ++i) gg[i] += dgamma[i];
    }
    if (g.nodes_[static_cast<size_t>(beta)].needs_grad) {
      Tensor& gb = g.grad_ref(beta);
      for (int64_t i = 0; i < gb.size(); ++i) gb[i] += dbeta[i];
    }
  });
}

int Graph::dense(int x, int w, int b) {
  Tensor y = kernels::dense_forward(value(x), value(w), value(b));
  return add(std::move(y), {x, w, b}, [x, w, b](Graph& g, int self) {
    Tensor dx, dw, db;
    const bool need_dx = g.nodes_[static_cast<size_t>(x)].needs_grad;
    kernels::dense_backward(g.value(x), g.value(w), g.grad(self), need_dx ? &dx : nullptr, dw, db);
    if (need_dx) {
      Tensor& gx = g.grad_ref(x);
      for (int64_t i = 0; i < gx.size(); ++i) gx[i] += dx[i];
    }
    if (g.nodes_[static_cast<size_t>(w)].needs_grad) {
      Tensor& gw = g.grad_ref(w);
      for (int64_t i = 0; i < gw.size(); ++i) gw[i] += dw[i];
    }
    if (g.nodes_[static_cast<size_t>(b)].needs_grad) {
      Tensor& gb = g.grad_ref(b);
      for (int64_t i = 0; i < gb.size(); ++i) gb[i] += db[i];
    }
  });
}

int Graph::activation(int x, kernels::Act kind) {
  Tensor y = kernels::act_forward(value(x), kind);
  return add(std::move(y), {x}, [x, kind](Graph& g, int self) {
    Tensor dx;
    kernels::act_backward(g.value(x), g.value(self), g.grad(self), kind, dx);
    Tensor& gx = g.grad_ref(x);
    for (int64_t i = 0; i < gx.size(); ++i) gx[i] += dx[i];
  });
}

int Graph::lstm(int x, int w_ih, int w_hh, int b) {
  auto cache = std::make_shared<kernels::LstmCache>();
  Tensor hs = kernels::lstm_forward(value(x), value(w_ih), value(w_hh), value(b), *cache);
  return add(std::move(hs), {x, w_ih, w_hh, b}, [x, w_ih, w_hh, b, cache](Graph& g, int self) {
    Tensor dx, dwi, dwh, db;
    kernels::lstm_backward(g.value(x), g.value(w_ih), g.value(w_hh), *cache, g.value(self), g.grad(self), dx, dwi,
                           dwh, db);
    if (g.nodes_[static_cast<size_t>(x)].needs_grad) {
      Tensor& gx = g.grad_ref(x);
      for (int64_t i = 0; i < gx.size(); ++i) gx[i] += dx[i];
    }
    if (g.nodes_[static_cast<size_t>(w_ih)].needs_grad) {
      Tensor& gw = g.grad_ref(w_ih);
      for (int64_t i = 0; i < gw.size(); ++i) gw[i] += dwi[i];
    }
    if (g.nodes_[static_cast<size_t>(w_hh)].needs_grad) {
      Tensor& gw = g.grad_ref(w_hh);
      for (int64_t i = 0; i < gw.size(); ++i) gw[i] += dwh[i];
    }
    if (g.nodes_[static_cast<size_t>(b)].needs_grad) {
      Tensor& gb = g.grad_ref(b);
      for (int64_t i = 0; i < gb.size(); ++i) gb[i] += db[i];
    }
  });
}

int Graph::similarity(int ref, int test, const SimilaritySpec& spec) {
  Tensor out = kernels_sim::similarity_forward(value(ref), value(test), spec);
  auto spec_copy = std::make_shared<SimilaritySpec>(spec);
  return add(std::move(out), {ref, test}, [ref, test, spec_copy](Graph& g, int self) {
    Tensor dref, dtest;
    kernels_sim::similarity_backward(g.value(ref), g.value(test), *spec_copy, g.grad(self), dref, dtest);
    if (g.nodes_[static_cast<size_t>(ref)].needs_grad) {
      Tensor& gr = g.grad_ref(ref);
      for (int64_t i = 0; i < gr.size(); ++i) gr[i] += dref[i];
    }
    if (g.nodes_[static_cast<size_t>(test)].needs_grad) {
      Tensor& gt = g.grad_ref(test);
      for (int64_t i = 0; i < gt.size(); ++i) gt[i] += dtest[i];
    }
  });
}

int Graph::reshape(int x, std::vector<int> shape) {
  Tensor y = value(x).reshaped(std::move(shape));
  return add(std::move(y), {x}, [x](Graph& g, int self) {
    Tensor& gx = g.grad_ref(x);
    const Tensor& dy = g.grad(self);
    for (int64_t i = 0; i < gx.size(); ++i) gx[i] += dy[i];
  });
}

int Graph::gather_rows(int x, std::vector<int> rows) {
  const Tensor& src = value(x);
  check(src.rank() == 2, "gather_rows: source must be a matrix, got ", src.shape_str());
  const int cols = src.dim(1);
  Tensor y({static_cast<int>(rows.size()), cols});
  for (size_t r = 0; r < rows.size(); ++r) {
    check(rows[r] >= 0 && rows[r] < src.dim(0), "gather_rows: row ", rows[r], " out of range");
    std::memcpy(y.data() + r * static_cast<size_t>(cols), src.data() + static_cast<size_t>(rows[r]) * cols,
                sizeof(float) * static_cast<size_t>(cols));
  }
  auto rows_copy = std::make_shared<std::vector<int>>(std::move(rows));
  return add(std::move(y), {x}, [x, rows_copy](Graph& g, int self) {
    Tensor& gx = g.grad_ref(x);
    const Tensor& dy = g.grad(self);
    const int cols = gx.dim(1);
    for (size_t r = 0; r < rows_copy->size(); ++r) {
      float* dst = gx.data() + static_cast<size_t>((*rows_copy)[r]) * cols;
      const float* src = dy.data() + r * static_cast<size_t>(cols);
      for (int i = 0; i < cols; ++i) dst[i] += src[i];
    }
  });
}

int Graph::row(int x, int r) {
  const Tensor& src = value(x);
  check(src.rank() == 2 && r >= 0 && r < src.dim(0), "row: index ", r, " out of range for ", src.shape_str());
  const int cols = src.dim(1);
  Tensor y({cols});
  std::memcpy(y.data(), src.data() + static_cast<size_t>(r) * cols, sizeof(float) * static_cast<size_t>(cols));
  return add(std::move(y), {x}, [x, r](Graph& g, int self) {
    Tensor& gx = g.grad_ref(x);
    const Tensor& dy = g.grad(self);
    const int cols = gx.dim(1);
    float* dst = gx.data() + static_cast<size_t>(r) * cols;
    for (int i = 0; i < cols; ++i) dst[i] += dy[i];
  });
}

int Graph::concat_cols(int a, int b) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  check(ta.rank() == 2 && tb.rank() == 2 && ta.dim(0) == tb.dim(0), "concat_cols: row count mismatch ",
        ta.shape_str(), " vs ", tb.shape_str());
  const int rows = ta.dim(0), ca = ta.dim(1), cb = tb.dim(1);
  Tensor y({rows, ca + cb});
  for (int r = 0; r < rows; ++r) {
    std::memcpy(y.data() + static_cast<size_t>(r) * (ca + cb), ta.data() + static_cast<size_t>(r) * ca,
                sizeof(float) * static_cast<size_t>(ca));
    std::memcpy(y.data() + static_cast<size_t>(r) * (ca + cb) + ca, tb.data() + static_cast<size_t>(r) * cb,
                sizeof(float) * static_cast<size_t>(cb));
  }
  return add(std::move(y), {a, b}, [a, b, ca, cb, rows](Graph& g, int self) {
    const Tensor& dy = g.grad(self);
    if (g.nodes_[static_cast<size_t>(a)].needs_grad) {
      Tensor& ga = g.grad_ref(a);
      for (int r = 0; r < rows; ++r)
        for (int i = 0; i < ca; ++i) ga[static_cast<size_t>(r) * ca + i] += dy[static_cast<size_t>(r) * (ca + cb) + i];
    }
    if (g.nodes_[static_cast<size_t>(b)].needs_grad) {
      Tensor& gb = g.grad_ref(b);
      for (int r = 0; r < rows; ++r)
        for (int i = 0; i < cb; ++i)
          gb[static_cast<size_t>(r) * cb + i] += dy[static_cast<size_t>(r) * (ca + cb) + ca + i];
    }
  });
}

int Graph::stack_scalars(const std::vector<int>& xs) {
  check(!xs.empty(), "stack_scalars: empty list");
  Tensor y({static_cast<int>(xs.size())});
  for (size_t i = 0; i < xs.size(); ++i) {
    check(value(xs[i]).size() == 1, "stack_scalars: element ", i, " is not scalar");
    y[static_cast<int64_t>(i)] = value(xs[i])[0];
  }
  // The tape allows a bounded parent list in add(); register a custom node.
  Node n;
  n.value = std::move(y);
  for (int id : xs)
    if (nodes_[static_cast<size_t>(check_id(id))].needs_grad) n.needs_grad = true;
  if (n.needs_grad) {
    auto ids = std::make_shared<std::vector<int>>(xs);
    n.backward = [ids](Graph& g, int self) {
      const Tensor& dy = g.grad(self);
      for (size_t i = 0; i < ids->size(); ++i) {
        if (!g.nodes_[static_cast<size_t>((*ids)[i])].needs_grad) continue;
        g.grad_ref((*ids)[i])[0] += dy[static_cast<int64_t>(i)];
      }
    };
  }
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

int Graph::mean_all(int x) {
  const Tensor& src = value(x);
  check(src.size() >= 1, "mean_all: empty tensor");
  double acc = 0.0;
  for (int64_t i = 0; i < src.size(); ++i) acc += src[i];
  Tensor y = Tensor::scalar(static_cast<float>(acc / static_cast<double>(src.size())));
  return add(std::move(y), {x}, [x](Graph& g, int self) {
    Tensor& gx = g.grad_ref(x);
    const float d = g.grad(self)[0] / static_cast<float>(gx.size());
    for (int64_t i = 0; i < gx.size(); ++i) gx[i] += d;
  });
}

int Graph::affine(int x, float scale, float shift) {
  const Tensor& src = value(x);
  Tensor y(src.shape());
  for (int64_t i = 0; i < src.size(); ++i) y[i] = scale * src[i] + shift;
  return add(std::move(y), {x}, [x, scale](Graph& g, int self) {
    Tensor& gx = g.grad_ref(x);
    const Tensor& dy = g.grad(self);
    for (int64_t i = 0; i < gx.size(); ++i) gx[i] += scale * dy[i];
  });
}

int Graph::bce(int p, Tensor targets) {
  const float loss = kernels::bce_forward(value(p), targets);
  auto t = std::make_shared<Tensor>(std::move(targets));
  return add(Tensor::scalar(loss), {p}, [p, t](Graph& g, int self) {
    Tensor dp;
    kernels::bce_backward(g.value(p), *t, g.grad(self)[0], dp);
    Tensor& gp = g.grad_ref(p);
    for (int64_t i = 0; i < gp.size(); ++i) gp[i] += dp[i];
  });
}

}  // namespace oneshot
