#pragma once

#include <string>
#include <vector>

#include "oneshot/tensor.hpp"

namespace oneshot {

// Memory-layer distance catalog. Paired metrics compare reference and test
// features at the same step; cross metrics compare a test step against every
// reference step. The diff family is paired-only (a cross variant would not
// be a distance vector over reference rows).
enum class Metric { diff, abs_diff, sq_diff, l1, l2, cos_sim };

struct SimilarityTerm {
  Metric metric;
  bool cross = false;
};

struct SimilaritySpec {
  std::vector<SimilarityTerm> terms;

  // Text form: '+'-separated terms, e.g. "l1.cross+l2.cross", "sqdiff", "cossim".
  static SimilaritySpec parse(const std::string& text);
  static SimilaritySpec default_spec() { return parse("l1.cross+l2.cross"); }
  std::string str() const;

  // Width of the per-step feature row fed to the differentiator.
  int step_width(int embed_dim, int seq_len) const;
  void validate() const;
};

inline constexpr float kL2Eps = 1e-12f;
inline constexpr float kCosEps = 1e-8f;

namespace kernels_sim {
// ref, test: (T, d) -> (T, step_width). Rows ordered by test step.
Tensor similarity_forward(const Tensor& ref, const Tensor& test, const SimilaritySpec& spec);
void similarity_backward(const Tensor& ref, const Tensor& test, const SimilaritySpec& spec, const Tensor& dout,
                         Tensor& dref, Tensor& dtest);
}  // namespace kernels_sim

}  // namespace oneshot
