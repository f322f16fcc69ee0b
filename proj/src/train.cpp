#include "oneshot/train.hpp"

#include <chrono>
#include <cmath>
#include <cstring>
#include <unordered_map>

#include "oneshot/check.hpp"

namespace oneshot {

namespace {

// A batch's windows resolved to distinct frames: the extractor runs once per
// distinct frame, sequences are gathered from the shared embedding matrix.
// Training touches many overlapping windows of the same section end, so this
// trims the dominant conv cost substantially without changing gradients.
struct AssembledBatch {
  Tensor images;  // (N_distinct, 6, 47, 84)
  std::vector<std::vector<int>> ref_rows;
  std::vector<std::vector<int>> test_rows;
  Tensor labels;
};

AssembledBatch assemble_batch(const PairStore& store, const RunCache& cache, const std::vector<uint32_t>& ids,
                              int seq_len) {
  AssembledBatch out;
  std::unordered_map<uint64_t, int> index;
  std::vector<std::pair<uint32_t, uint32_t>> distinct;
  auto row_of = [&](uint32_t run, uint32_t frame) {
    const uint64_t key = (static_cast<uint64_t>(run) << 32) | frame;
    auto it = index.find(key);
    if (it != index.end()) return it->second;
    const int row = static_cast<int>(distinct.size());
    index.emplace(key, row);
    distinct.emplace_back(run, frame);
    return row;
  };
  out.labels = Tensor::zeros({static_cast<int>(ids.size())});
  for (size_t i = 0; i < ids.size(); ++i) {
    const TrainingPair& p = store.pairs[ids[i]];
    std::vector<int> rr(static_cast<size_t>(seq_len)), tr(static_cast<size_t>(seq_len));
    for (int k = 0; k < seq_len; ++k) {
      rr[static_cast<size_t>(k)] = row_of(p.ref_run, p.ref_start + static_cast<uint32_t>(k));
      tr[static_cast<size_t>(k)] = row_of(p.test_run, p.test_start + static_cast<uint32_t>(k));
    }
    out.ref_rows.push_back(std::move(rr));
    out.test_rows.push_back(std::move(tr));
    out.labels[static_cast<int64_t>(i)] = p.label ? 1.0f : 0.0f;
  }
  const int n = static_cast<int>(distinct.size());
  out.images = Tensor({n, kImgC, kImgH, kImgW});
  const size_t img_sz = static_cast<size_t>(kImgC) * kImgH * kImgW;
  for (int r = 0; r < n; ++r) {
    const auto [run, frame] = distinct[static_cast<size_t>(r)];
    std::memcpy(out.images.data() + static_cast<size_t>(r) * img_sz,
                cache.view(run).image(static_cast<int>(frame)), img_sz * 4);
  }
  return out;
}

struct BatchOutput {
  float loss = 0.0f;
  Tensor probs;
};

BatchOutput run_batch(Model& model, const AssembledBatch& batch, BnMode mode, bool learn) {
  Graph g;
  std::map<std::string, int> bind;
  model.set_train_bindings(learn);
  const int images = g.leaf(batch.images, false);
  const int feats = model.features_graph(g, images, mode, bind);
  std::vector<int> logits;
  logits.reserve(batch.ref_rows.size());
  for (size_t i = 0; i < batch.ref_rows.size(); ++i) {
    const int r = g.gather_rows(feats, batch.ref_rows[i]);
    const int t = g.gather_rows(feats, batch.test_rows[i]);
    logits.push_back(model.logit_graph(g, r, t, bind));
  }
  const int stacked = g.stack_scalars(logits);
  const int probs = g.sigmoid(stacked);
  const int loss = g.bce(probs, batch.labels);
  BatchOutput out;
  out.loss = g.value(loss)[0];
  out.probs = g.value(probs);
  if (learn) {
    g.backward(loss);
    for (auto& [name, p] : model.params().all()) {
      auto it = bind.find(name);
      if (it == bind.end()) continue;
      const Tensor& grad = g.grad(it->second);
      std::memcpy(p.grad.data(), grad.data(), sizeof(float) * static_cast<size_t>(grad.size()));
    }
  }
  model.set_train_bindings(false);
  return out;
}

}  // namespace

EvalStats evaluate_pairs(Model& model, const PairStore& store, const RunCache& cache,
                         const std::vector<uint32_t>& pair_ids) {
  EvalStats stats;
  if (pair_ids.empty()) return stats;
  const int chunk = 64;  // larger eval batches amortize the extractor further
  double loss_sum = 0.0;
  int correct = 0, pos_total = 0, pos_hit = 0;
  for (size_t at = 0; at < pair_ids.size(); at += chunk) {
    std::vector<uint32_t> ids(pair_ids.begin() + static_cast<std::ptrdiff_t>(at),
                              pair_ids.begin() + static_cast<std::ptrdiff_t>(std::min(pair_ids.size(), at + chunk)));
    AssembledBatch batch = assemble_batch(store, cache, ids, model.config().seq_len);
    BatchOutput out = run_batch(model, batch, BnMode::infer, false);
    loss_sum += static_cast<double>(out.loss) * static_cast<double>(ids.size());
    for (size_t i = 0; i < ids.size(); ++i) {
      const bool predicted = out.probs[static_cast<int64_t>(i)] > 0.5f;
      const bool truth = batch.labels[static_cast<int64_t>(i)] == 1.0f;
      if (predicted == truth) ++correct;
      if (truth) {
        ++pos_total;
        if (predicted) ++pos_hit;
      }
    }
  }
  stats.loss = static_cast<float>(loss_sum / static_cast<double>(pair_ids.size()));
  stats.accuracy = static_cast<float>(correct) / static_cast<float>(pair_ids.size());
  stats.positives = pos_total;
  stats.positive_recall = pos_total ? static_cast<float>(pos_hit) / static_cast<float>(pos_total) : 0.0f;
  return stats;
}

TrainResult train_model(Model& model, const PairStore& store, const RunCache& cache, const EpochCallback& on_epoch) {
  const McnConfig& cfg = model.config();
  std::vector<uint32_t> all_ids(store.pairs.size());
  for (uint32_t i = 0; i < all_ids.size(); ++i) all_ids[i] = i;
  std::vector<uint32_t> train_ids, val_ids;
  split_train_val(all_ids, cfg.val_fraction, Rng::derive(cfg.seed, "split"), train_ids, val_ids);
  check(!train_ids.empty() && !val_ids.empty(), "train: store with ", store.pairs.size(),
        " pairs leaves an empty split");

  OptConfig opt;
  opt.kind = OptKind::adam;
  opt.lr = cfg.lr;

  TrainResult result;
  std::map<std::string, Tensor> best_params;
  std::vector<BnRunning> best_bn;
  int64_t best_step = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    auto batches = make_batches(store, train_ids, cfg.batch_size, Rng::derive(cfg.seed, "epochs"), epoch);
    double loss_sum = 0.0;
    int64_t pair_count = 0;
    for (size_t b = 0; b < batches.size(); ++b) {
      AssembledBatch batch = assemble_batch(store, cache, batches[b], cfg.seq_len);
      BatchOutput out = run_batch(model, batch, BnMode::train, true);
      if (!std::isfinite(out.loss))
        throw std::runtime_error(strcat_msg("train: non-finite loss at epoch ", epoch, " batch ", b));
      loss_sum += static_cast<double>(out.loss) * static_cast<double>(batches[b].size());
      pair_count += static_cast<int64_t>(batches[b].size());
      optimizer_step(model.params(), opt, model.opt_step());
    }
    EvalStats val = evaluate_pairs(model, store, cache, val_ids);
    EpochStats es;
    es.epoch = epoch;
    es.train_loss = static_cast<float>(loss_sum / static_cast<double>(pair_count));
    es.val_loss = val.loss;
    es.val_accuracy = val.accuracy;
    es.val_positive_recall = val.positive_recall;
    es.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.curves.push_back(es);
    if (result.best_epoch < 0 || val.accuracy > result.best_val_accuracy) {
      result.best_epoch = epoch;
      result.best_val_accuracy = val.accuracy;
      best_params.clear();
      for (const auto& [name, p] : model.params().all()) best_params.emplace(name, p.value);
      best_bn = model.bn();
      best_step = model.opt_step();
    }
    if (on_epoch) on_epoch(es);
  }

  // Retain the best-validation checkpoint.
  for (auto& [name, p] : model.params().all()) p.value = best_params.at(name);
  model.bn() = best_bn;
  model.opt_step() = best_step;
  return result;
}

}  // namespace oneshot
