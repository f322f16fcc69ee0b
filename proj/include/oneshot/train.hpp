#pragma once

#include <functional>
#include <string>
#include <vector>

#include "oneshot/dataset.hpp"
#include "oneshot/model.hpp"
#include "oneshot/optim.hpp"

namespace oneshot {

struct EpochStats {
  int epoch = 0;
  float train_loss = 0.0f;
  float val_loss = 0.0f;
  float val_accuracy = 0.0f;
  float val_positive_recall = 0.0f;
  double seconds = 0.0;
};

struct TrainResult {
  std::vector<EpochStats> curves;
  int best_epoch = -1;
  float best_val_accuracy = 0.0f;
};

using EpochCallback = std::function<void(const EpochStats&)>;

// Full training loop per the episodic protocol: seeded train/val split,
// per-epoch batches grouped by (course, section), Adam on mean BCE, best
// validation checkpoint restored at the end. Aborts with epoch/batch context
// if the loss turns non-finite.
TrainResult train_model(Model& model, const PairStore& store, const RunCache& cache,
                        const EpochCallback& on_epoch = nullptr);

// Forward-only evaluation of pair ids: mean loss, threshold-0.5 accuracy and
// positive-class recall.
struct EvalStats {
  float loss = 0.0f;
  float accuracy = 0.0f;
  float positive_recall = 0.0f;
  int positives = 0;
};
EvalStats evaluate_pairs(Model& model, const PairStore& store, const RunCache& cache,
                         const std::vector<uint32_t>& pair_ids);

}  // namespace oneshot
