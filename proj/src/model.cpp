#include "oneshot/model.hpp"

#include <cmath>
#include <cstring>

#include "json.hpp"
#include "oneshot/check.hpp"

namespace oneshot {

using nlohmann::ordered_json;

const char* ablation_name(Ablation a) {
  switch (a) {
    case Ablation::rem_fe: return "remFE";
    case Ablation::rem_mem: return "remMEM";
    case Ablation::rem_dif: return "remDIF";
    default: return "none";
  }
}

Ablation ablation_from_name(const std::string& name) {
  if (name == "none") return Ablation::none;
  if (name == "remFE") return Ablation::rem_fe;
  if (name == "remMEM") return Ablation::rem_mem;
  if (name == "remDIF") return Ablation::rem_dif;
  throw std::invalid_argument("unknown ablation '" + name + "'");
}

std::string McnConfig::to_json() const {
  ordered_json j;
  j["conv_layers"] = conv_layers;
  j["filters"] = filters;
  j["embed_dim"] = embed_dim;
  j["lstm_hidden"] = lstm_hidden;
  j["seq_len"] = seq_len;
  j["similarity"] = sim.str();
  j["ablation"] = ablation_name(ablation);
  j["epochs"] = epochs;
  j["lr"] = lr;
  j["batch_size"] = batch_size;
  j["val_fraction"] = val_fraction;
  j["near_negatives"] = near_negatives;
  j["seed"] = seed;
  return j.dump();
}

McnConfig McnConfig::from_json(const std::string& text) {
  ordered_json j = ordered_json::parse(text);
  McnConfig c;
  if (j.contains("conv_layers")) c.conv_layers = j["conv_layers"].get<int>();
  if (j.contains("filters")) c.filters = j["filters"].get<int>();
  if (j.contains("embed_dim")) c.embed_dim = j["embed_dim"].get<int>();
  if (j.contains("lstm_hidden")) c.lstm_hidden = j["lstm_hidden"].get<int>();
  if (j.contains("seq_len")) c.seq_len = j["seq_len"].get<int>();
  if (j.contains("similarity")) c.sim = SimilaritySpec::parse(j["similarity"].get<std::string>());
  if (j.contains("ablation")) c.ablation = ablation_from_name(j["ablation"].get<std::string>());
  if (j.contains("epochs")) c.epochs = j["epochs"].get<int>();
  if (j.contains("lr")) c.lr = j["lr"].get<float>();
  if (j.contains("batch_size")) c.batch_size = j["batch_size"].get<int>();
  if (j.contains("val_fraction")) c.val_fraction = j["val_fraction"].get<float>();
  if (j.contains("near_negatives")) c.near_negatives = j["near_negatives"].get<bool>();
  if (j.contains("seed")) c.seed = j["seed"].get<uint64_t>();
  c.validate();
  return c;
}

int McnConfig::flat_features() const {
  int h = kImgH, w = kImgW;
  for (int l = 0; l < conv_layers; ++l) {
    h /= 2;
    w /= 2;
  }
  return filters * h * w;
}

int McnConfig::feature_dim() const {
  return ablation == Ablation::rem_fe ? kImgC * kImgH * kImgW : embed_dim;
}

int McnConfig::differentiator_input() const {
  if (ablation == Ablation::rem_mem) return 2 * embed_dim;
  return sim.step_width(feature_dim(), seq_len);
}

void McnConfig::validate() const {
  check(conv_layers >= 1 && conv_layers <= 5, "mcn config: conv_layers must be 1..5, got ", conv_layers);
  check(filters >= 1 && embed_dim >= 1 && lstm_hidden >= 1 && seq_len >= 1, "mcn config: sizes must be positive");
  check(epochs >= 1 && batch_size >= 1, "mcn config: epochs and batch size must be positive");
  check(lr > 0.0f, "mcn config: learning rate must be positive");
  check(val_fraction > 0.0f && val_fraction < 1.0f, "mcn config: val_fraction must be in (0,1)");
  sim.validate();
  if (ablation == Ablation::rem_dif) {
    // The memory-layer output is the final output: a paired cosine per step.
    SimilaritySpec want = SimilaritySpec::parse("cossim");
    check(sim.str() == want.str(), "mcn config: remDIF requires similarity 'cossim', got '", sim.str(), "'");
  }
  {
    int h = kImgH, w = kImgW;
    for (int l = 0; l < conv_layers; ++l) {
      check(h >= 2 && w >= 2, "mcn config: conv stack too deep for the ", kImgH, "x", kImgW, " input");
      h /= 2;
      w /= 2;
    }
  }
}

Model Model::build(const McnConfig& cfg) {
  cfg.validate();
  Model m;
  m.cfg_ = cfg;
  Rng rng(Rng::derive(cfg.seed, "model-init"));
  const bool has_fe = cfg.ablation != Ablation::rem_fe;
  const bool has_dif = cfg.ablation != Ablation::rem_dif;

  if (has_fe) {
    int in_ch = kImgC;
    for (int l = 1; l <= cfg.conv_layers; ++l) {
      const std::string base = "fe.conv" + std::to_string(l);
      m.params_.add(base + ".w", kaiming_uniform(rng, {cfg.filters, in_ch, 3, 3}, in_ch * 9));
      m.params_.add(base + ".b", Tensor::zeros({cfg.filters}));
      m.params_.add("fe.bn" + std::to_string(l) + ".gamma", Tensor::full({cfg.filters}, 1.0f));
      m.params_.add("fe.bn" + std::to_string(l) + ".beta", Tensor::zeros({cfg.filters}));
      m.bn_.push_back(BnRunning::init(cfg.filters));
      in_ch = cfg.filters;
    }
    m.params_.add("fe.embed.w", kaiming_uniform(rng, {cfg.embed_dim, cfg.flat_features()}, cfg.flat_features()));
    m.params_.add("fe.embed.b", Tensor::zeros({cfg.embed_dim}));
  }
  if (has_dif) {
    const int din = cfg.differentiator_input();
    const float bound = 1.0f / std::sqrt(static_cast<float>(cfg.lstm_hidden));
    m.params_.add("dif.lstm.w_ih", uniform_init(rng, {4 * cfg.lstm_hidden, din}, bound));
    m.params_.add("dif.lstm.w_hh", uniform_init(rng, {4 * cfg.lstm_hidden, cfg.lstm_hidden}, bound));
    m.params_.add("dif.lstm.b", uniform_init(rng, {4 * cfg.lstm_hidden}, bound));
    m.params_.add("dif.head.w", kaiming_uniform(rng, {1, cfg.lstm_hidden}, cfg.lstm_hidden));
    m.params_.add("dif.head.b", Tensor::zeros({1}));
  }
  return m;
}

int Model::param_leaf(Graph& g, const std::string& name, std::map<std::string, int>& bind, bool needs_grad) {
  auto it = bind.find(name);
  if (it != bind.end()) return it->second;
  const int id = g.leaf(params_.get(name).value, needs_grad);
  bind.emplace(name, id);
  return id;
}

int Model::features_graph(Graph& g, int images, BnMode mode, std::map<std::string, int>& bind) {
  const Tensor& v = g.value(images);
  check(v.rank() == 4 && v.dim(1) == kImgC && v.dim(2) == kImgH && v.dim(3) == kImgW,
        "mcn: images must be (N,", kImgC, ",", kImgH, ",", kImgW, "), got ", v.shape_str());
  const int n = v.dim(0);
  if (cfg_.ablation == Ablation::rem_fe) {
    // images flow to the memory layer directly
    return g.reshape(images, {n, kImgC * kImgH * kImgW});
  }
  const bool needs = bind_needs_grad_;
  int x = images;
  for (int l = 1; l <= cfg_.conv_layers; ++l) {
    const std::string conv = "fe.conv" + std::to_string(l);
    const std::string bn = "fe.bn" + std::to_string(l);
    x = g.conv2d(x, param_leaf(g, conv + ".w", bind, needs), param_leaf(g, conv + ".b", bind, needs));
    x = g.relu(x);
    x = g.maxpool2x2(x);
    x = g.batchnorm2d(x, param_leaf(g, bn + ".gamma", bind, needs), param_leaf(g, bn + ".beta", bind, needs),
                      bn_[static_cast<size_t>(l - 1)], mode);
  }
  x = g.reshape(x, {n, cfg_.flat_features()});
  // linear 50-d embedding
  return g.dense(x, param_leaf(g, "fe.embed.w", bind, needs), param_leaf(g, "fe.embed.b", bind, needs));
}

int Model::logit_graph(Graph& g, int ref, int test, std::map<std::string, int>& bind) {
  const bool needs = bind_needs_grad_;
  if (cfg_.ablation == Ablation::rem_dif) {
    // threshold head: mean per-step cosine, centered at the 0.5 threshold
    int s = g.similarity(ref, test, cfg_.sim);
    int mean = g.mean_all(s);
    return g.affine(mean, 10.0f, -5.0f);
  }
  int steps;
  if (cfg_.ablation == Ablation::rem_mem) {
    steps = g.concat_cols(ref, test);
  } else {
    steps = g.similarity(ref, test, cfg_.sim);
  }
  int hs = g.lstm(steps, param_leaf(g, "dif.lstm.w_ih", bind, needs), param_leaf(g, "dif.lstm.w_hh", bind, needs),
                  param_leaf(g, "dif.lstm.b", bind, needs));
  int last = g.row(hs, cfg_.seq_len - 1);
  return g.dense(last, param_leaf(g, "dif.head.w", bind, needs), param_leaf(g, "dif.head.b", bind, needs));
}

Tensor Model::extract_features(const Tensor& images) {
  Graph g;
  Tensor batch = images.rank() == 3 ? images.reshaped({1, kImgC, kImgH, kImgW}) : images;
  std::map<std::string, int> bind;
  const int out = features_graph(g, g.input(std::move(batch)), BnMode::infer, bind);
  return g.value(out);
}

float Model::forward_features(const Tensor& ref_feats, const Tensor& test_feats) {
  check(ref_feats.rank() == 2 && ref_feats.dim(0) == cfg_.seq_len, "mcn: reference features must be (",
        cfg_.seq_len, ",d), got ", ref_feats.shape_str());
  check(test_feats.same_shape(ref_feats), "mcn: feature sequence shapes differ: ", ref_feats.shape_str(), " vs ",
        test_feats.shape_str());
  Graph g;
  std::map<std::string, int> bind;
  const int logit = logit_graph(g, g.input(ref_feats), g.input(test_feats), bind);
  const int p = g.sigmoid(logit);
  return g.value(p)[0];
}

float Model::forward(const Tensor& ref_images, const Tensor& test_images) {
  check(ref_images.rank() == 4 && ref_images.dim(0) == cfg_.seq_len, "mcn: reference stack must be (", cfg_.seq_len,
        ",", kImgC, ",", kImgH, ",", kImgW, "), got ", ref_images.shape_str());
  check(test_images.same_shape(ref_images), "mcn: test stack shape ", test_images.shape_str(),
        " differs from reference ", ref_images.shape_str());
  // One extractor pass over both stacks (shared weights).
  Tensor both({2 * cfg_.seq_len, kImgC, kImgH, kImgW});
  std::memcpy(both.data(), ref_images.data(), sizeof(float) * static_cast<size_t>(ref_images.size()));
  std::memcpy(both.data() + ref_images.size(), test_images.data(),
              sizeof(float) * static_cast<size_t>(test_images.size()));
  Tensor feats = extract_features(both);
  Tensor ref_f({cfg_.seq_len, cfg_.feature_dim()});
  Tensor test_f({cfg_.seq_len, cfg_.feature_dim()});
  const size_t row = static_cast<size_t>(cfg_.feature_dim());
  std::memcpy(ref_f.data(), feats.data(), sizeof(float) * row * static_cast<size_t>(cfg_.seq_len));
  std::memcpy(test_f.data(), feats.data() + static_cast<size_t>(cfg_.seq_len) * row,
              sizeof(float) * row * static_cast<size_t>(cfg_.seq_len));
  return forward_features(ref_f, test_f);
}

StreamScorer::StreamScorer(Model& model, Tensor ref_images) : model_(model) { set_reference(ref_images); }

void StreamScorer::set_reference(const Tensor& ref_images) {
  ref_feats_ = model_.extract_features(ref_images);
}

std::optional<float> StreamScorer::push(const Tensor& image) {
  window_.push_back(model_.extract_features(image));  // (1, d)
  const int t = model_.config().seq_len;
  while (static_cast<int>(window_.size()) > t) window_.pop_front();
  if (static_cast<int>(window_.size()) < t) return std::nullopt;
  const int d = model_.config().feature_dim();
  Tensor test_f({t, d});
  for (int i = 0; i < t; ++i)
    std::memcpy(test_f.data() + static_cast<size_t>(i) * d, window_[static_cast<size_t>(i)].data(),
                sizeof(float) * static_cast<size_t>(d));
  return model_.forward_features(ref_feats_, test_f);
}

}  // namespace oneshot
