#pragma once

#include <deque>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "oneshot/graph.hpp"
#include "oneshot/params.hpp"
#include "oneshot/render.hpp"
#include "oneshot/similarity.hpp"

namespace oneshot {

enum class Ablation { none, rem_fe, rem_mem, rem_dif };

const char* ablation_name(Ablation a);
Ablation ablation_from_name(const std::string& name);

struct McnConfig {
  int conv_layers = 4;
  int filters = 64;          // 3x3 kernels throughout
  int embed_dim = 50;
  int lstm_hidden = 10;
  int seq_len = 10;          // reference/test sequence length
  SimilaritySpec sim = SimilaritySpec::default_spec();
  Ablation ablation = Ablation::none;
  int epochs = 10;
  float lr = 1e-4f;
  int batch_size = 8;
  float val_fraction = 0.15f;
  bool near_negatives = false;
  uint64_t seed = 1;

  std::string to_json() const;
  static McnConfig from_json(const std::string& text);

  // Flattened feature length after the conv stack (640 for the defaults).
  int flat_features() const;
  // Per-frame feature width entering the memory layer.
  int feature_dim() const;
  // Per-step width entering the differentiator.
  int differentiator_input() const;
  void validate() const;
};

// The manager classifier: Siamese feature extractor (shared weights by
// construction: one ParamSet), memory-layer similarity, LSTM differentiator.
class Model {
 public:
  static Model build(const McnConfig& cfg);

  const McnConfig& config() const { return cfg_; }
  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }
  std::vector<BnRunning>& bn() { return bn_; }
  const std::vector<BnRunning>& bn() const { return bn_; }
  int64_t& opt_step() { return opt_step_; }
  int64_t opt_step() const { return opt_step_; }

  // --- graph builders (shared by training and inference) ---
  // images node: (N,6,47,84) -> (N, feature_dim). Binds parameters as leaves
  // on first use; bind maps parameter name -> node id.
  int features_graph(Graph& g, int images, BnMode mode, std::map<std::string, int>& bind);
  // ref/test: (seq_len, feature_dim) nodes -> scalar pre-sigmoid logit.
  int logit_graph(Graph& g, int ref, int test, std::map<std::string, int>& bind);

  // --- inference（running-stat batchnorm, no gradients) ---
  Tensor extract_features(const Tensor& images);  // (N,6,47,84) or (6,47,84) -> (N, feature_dim)
  float forward_features(const Tensor& ref_feats, const Tensor& test_feats);
  // The full operation: two 10-frame image stacks -> match probability.
  float forward(const Tensor& ref_images, const Tensor& test_images);

  int param_leaf(Graph& g, const std::string& name, std::map<std::string, int>& bind, bool needs_grad);
  void set_train_bindings(bool needs_grad) { bind_needs_grad_ = needs_grad; }

 private:
  McnConfig cfg_;
  ParamSet params_;
  std::vector<BnRunning> bn_;
  int64_t opt_step_ = 0;
  bool bind_needs_grad_ = false;
};

// Sliding-window scorer for frame streams: extracts each arriving frame once,
// reuses cached reference features. Produces a probability from the 10th
// frame onward.
class StreamScorer {
 public:
  StreamScorer(Model& model, Tensor ref_images /*(10,6,47,84)*/);
  void set_reference(const Tensor& ref_images);
  std::optional<float> push(const Tensor& image);  // (6,47,84)
  void reset_window() { window_.clear(); }
  int window_fill() const { return static_cast<int>(window_.size()); }

 private:
  Model& model_;
  Tensor ref_feats_;
  std::deque<Tensor> window_;
};

}  // namespace oneshot
