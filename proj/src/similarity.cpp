#include "oneshot/similarity.hpp"

#include <cmath>

#include "oneshot/check.hpp"

namespace oneshot {

namespace {

struct MetricName {
  const char* name;
  Metric metric;
};
constexpr MetricName kNames[] = {{"diff", Metric::diff}, {"absdiff", Metric::abs_diff}, {"sqdiff", Metric::sq_diff},
                                 {"l1", Metric::l1},     {"l2", Metric::l2},           {"cossim", Metric::cos_sim}};

std::string to_lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace

SimilaritySpec SimilaritySpec::parse(const std::string& text) {
  SimilaritySpec spec;
  std::string cur;
  auto flush = [&spec](std::string term) {
    if (term.empty()) return;
    term = to_lower(term);
    bool cross = false;
    if (auto pos = term.rfind(".cross"); pos != std::string::npos && pos == term.size() - 6) {
      cross = true;
      term = term.substr(0, pos);
    }
    for (const auto& n : kNames)
      if (term == n.name) {
        spec.terms.push_back({n.metric, cross});
        return;
      }
    throw std::invalid_argument("similarity: unknown metric '" + term + "'");
  };
  for (char c : text) {
    if (c == '+' || c == ',') {
      flush(cur);
      cur.clear();
    } else if (!std::isspace(static_cast<unsigned char>(c))) {
      cur += c;
    }
  }
  flush(cur);
  spec.validate();
  return spec;
}

std::string SimilaritySpec::str() const {
  std::string out;
  for (const auto& t : terms) {
    if (!out.empty()) out += '+';
    for (const auto& n : kNames)
      if (n.metric == t.metric) out += n.name;
    if (t.cross) out += ".cross";
  }
  return out;
}

void SimilaritySpec::validate() const {
  check(!terms.empty(), "similarity: spec must contain at least one metric");
  for (const auto& t : terms) {
    const bool vector_metric = t.metric == Metric::diff || t.metric == Metric::abs_diff || t.metric == Metric::sq_diff;
    check(!(t.cross && vector_metric), "similarity: ", str(), ": diff-family metrics support paired mode only");
  }
}

int SimilaritySpec::step_width(int embed_dim, int seq_len) const {
  int w = 0;
  for (const auto& t : terms) {
    if (t.cross)
      w += seq_len;
    else if (t.metric == Metric::diff || t.metric == Metric::abs_diff || t.metric == Metric::sq_diff)
      w += embed_dim;
    else
      w += 1;
  }
  return w;
}

namespace kernels_sim {

namespace {

inline float l1_dist(const float* u, const float* v, int d) {
  float s = 0.0f;
  for (int i = 0; i < d; ++i) s += std::fabs(u[i] - v[i]);
  return s;
}

inline float l2_dist(const float* u, const float* v, int d) {
  float s = kL2Eps;
  for (int i = 0; i < d; ++i) {
    const float t = u[i] - v[i];
    s = std::fma(t, t, s);
  }
  return std::sqrt(s);
}

struct CosParts {
  float dot, nu, nv, value;
};

inline CosParts cos_parts(const float* u, const float* v, int d) {
  float dot = 0.0f, uu = 0.0f, vv = 0.0f;
  for (int i = 0; i < d; ++i) {
    dot = std::fma(u[i], v[i], dot);
    uu = std::fma(u[i], u[i], uu);
    vv = std::fma(v[i], v[i], vv);
  }
  CosParts p;
  p.dot = dot;
  p.nu = std::sqrt(uu);
  p.nv = std::sqrt(vv);
  p.value = dot / (p.nu * p.nv + kCosEps);
  return p;
}

// d(cos)/du and d(cos)/dv accumulated with weight g.
inline void cos_backward_into(const float* u, const float* v, int d, float g, float* du, float* dv) {
  const CosParts p = cos_parts(u, v, d);
  const float denom = p.nu * p.nv + kCosEps;
  const float nu = p.nu > 1e-12f ? p.nu : 1e-12f;
  const float nv = p.nv > 1e-12f ? p.nv : 1e-12f;
  for (int i = 0; i < d; ++i) {
    du[i] += g * (v[i] / denom - p.value * p.nv * u[i] / (nu * denom));
    dv[i] += g * (u[i] / denom - p.value * p.nu * v[i] / (nv * denom));
  }
}

}  // namespace

Tensor similarity_forward(const Tensor& ref, const Tensor& test, const SimilaritySpec& spec) {
  check(ref.rank() == 2 && test.rank() == 2, "similarity: inputs must be (T,d) matrices");
  check(ref.dim(1) == test.dim(1), "similarity: embedding length mismatch ", ref.dim(1), " vs ", test.dim(1));
  check(ref.dim(0) == test.dim(0), "similarity: sequence length mismatch ", ref.dim(0), " vs ", test.dim(0));
  const int t_len = ref.dim(0), d = ref.dim(1);
  const int width = spec.step_width(d, t_len);
  Tensor out({t_len, width});
  for (int t = 0; t < t_len; ++t) {
    const float* tv = test.data() + static_cast<size_t>(t) * d;
    float* row = out.data() + static_cast<size_t>(t) * width;
    int col = 0;
    for (const auto& term : spec.terms) {
      const float* rv = ref.data() + static_cast<size_t>(t) * d;
      if (term.cross) {
        for (int r = 0; r < t_len; ++r) {
          const float* rr = ref.data() + static_cast<size_t>(r) * d;
          switch (term.metric) {
            case Metric::l1: row[col + r] = l1_dist(tv, rr, d); break;
            case Metric::l2: row[col + r] = l2_dist(tv, rr, d); break;
            case Metric::cos_sim: row[col + r] = cos_parts(tv, rr, d).value; break;
            default: break;
          }
        }
        col += t_len;
        continue;
      }
      switch (term.metric) {
        case Metric::diff:
          for (int i = 0; i < d; ++i) row[col + i] = rv[i] - tv[i];
          col += d;
          break;
        case Metric::abs_diff:
          for (int i = 0; i < d; ++i) row[col + i] = std::fabs(rv[i] - tv[i]);
          col += d;
          break;
        case Metric::sq_diff:
          for (int i = 0; i < d; ++i) {
            const float t2 = rv[i] - tv[i];
            row[col + i] = t2 * t2;
          }
          col += d;
          break;
        case Metric::l1: row[col++] = l1_dist(rv, tv, d); break;
        case Metric::l2: row[col++] = l2_dist(rv, tv, d); break;
        case Metric::cos_sim: row[col++] = cos_parts(rv, tv, d).value; break;
      }
    }
  }
  return out;
}

void similarity_backward(const Tensor& ref, const Tensor& test, const SimilaritySpec& spec, const Tensor& dout,
                         Tensor& dref, Tensor& dtest) {
  const int t_len = ref.dim(0), d = ref.dim(1);
  dref = Tensor::zeros(ref.shape());
  dtest = Tensor::zeros(test.shape());
  const int width = spec.step_width(d, t_len);
  for (int t = 0; t < t_len; ++t) {
    const float* tv = test.data() + static_cast<size_t>(t) * d;
    float* dtv = dtest.data() + static_cast<size_t>(t) * d;
    const float* grow = dout.data() + static_cast<size_t>(t) * width;
    int col = 0;
    for (const auto& term : spec.terms) {
      const float* rv = ref.data() + static_cast<size_t>(t) * d;
      float* drv = dref.data() + static_cast<size_t>(t) * d;
      if (term.cross) {
        for (int r = 0; r < t_len; ++r) {
          const float g = grow[col + r];
          if (g == 0.0f) continue;
          const float* rr = ref.data() + static_cast<size_t>(r) * d;
          float* drr = dref.data() + static_cast<size_t>(r) * d;
          switch (term.metric) {
            case Metric::l1:
              for (int i = 0; i < d; ++i) {
                const float s = tv[i] > rr[i] ? 1.0f : (tv[i] < rr[i] ? -1.0f : 0.0f);
                dtv[i] += g * s;
                drr[i] -= g * s;
              }
              break;
            case Metric::l2: {
              const float dist = l2_dist(tv, rr, d);
              for (int i = 0; i < d; ++i) {
                const float v = g * (tv[i] - rr[i]) / dist;
                dtv[i] += v;
                drr[i] -= v;
              }
              break;
            }
            case Metric::cos_sim: cos_backward_into(tv, rr, d, g, dtv, drr); break;
            default: break;
          }
        }
        col += t_len;
        continue;
      }
      switch (term.metric) {
        case Metric::diff:
          for (int i = 0; i < d; ++i) {
            drv[i] += grow[col + i];
            dtv[i] -= grow[col + i];
          }
          col += d;
          break;
        case Metric::abs_diff:
          for (int i = 0; i < d; ++i) {
            const float s = rv[i] > tv[i] ? 1.0f : (rv[i] < tv[i] ? -1.0f : 0.0f);
            drv[i] += grow[col + i] * s;
            dtv[i] -= grow[col + i] * s;
          }
          col += d;
          break;
        case Metric::sq_diff:
          for (int i = 0; i < d; ++i) {
            const float v = 2.0f * (rv[i] - tv[i]) * grow[col + i];
            drv[i] += v;
            dtv[i] -= v;
          }
          col += d;
          break;
        case Metric::l1: {
          const float g = grow[col++];
          for (int i = 0; i < d; ++i) {
            const float s = rv[i] > tv[i] ? 1.0f : (rv[i] < tv[i] ? -1.0f : 0.0f);
            drv[i] += g * s;
            dtv[i] -= g * s;
          }
          break;
        }
        case Metric::l2: {
          const float g = grow[col++];
          const float dist = l2_dist(rv, tv, d);
          for (int i = 0; i < d; ++i) {
            const float v = g * (rv[i] - tv[i]) / dist;
            drv[i] += v;
            dtv[i] -= v;
          }
          break;
        }
        case Metric::cos_sim: cos_backward_into(rv, tv, d, grow[col++], drv, dtv); break;
      }
    }
  }
}

}  // namespace kernels_sim

}  // namespace oneshot
