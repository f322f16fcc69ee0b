#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "oneshot/frame.hpp"
#include "oneshot/sections.hpp"

namespace oneshot {

enum class PairKind : uint8_t { positive = 0, negative = 1, near_negative = 2 };

// One episodic training example: two 10-frame windows identified by
// (run index, start frame) into a course's run list, never by copied images.
struct TrainingPair {
  uint32_t ref_run = 0;
  uint32_t ref_start = 0;
  uint32_t test_run = 0;
  uint32_t test_start = 0;
  uint16_t section = 0;
  uint8_t label = 0;  // 1 iff positive
  PairKind kind = PairKind::positive;
};

struct PairGenStats {
  int positives = 0;
  int negatives = 0;
  int near_negatives = 0;
  std::vector<std::string> warnings;
};

// All pairs for one course given its aligned per-run section layouts.
// References enumerate every 10-frame window inside each 15-frame section end
// (6 per run); positives take every reference x test combination over ordered
// run pairs; negatives are a seeded random sample of body windows ending at
// least 10 frames before the section end, twice the positive count. With
// near_negatives, every window inside the 15 frames before the section end is
// paired with every reference and included twice, on top of the negatives.
std::vector<TrainingPair> generate_pairs(const std::vector<SectionLayout>& run_layouts, uint64_t seed,
                                         bool near_negatives, PairGenStats* stats = nullptr);

// --- pair store (OSP1) ---

struct RunRef {
  std::string path;        // relative to the store's directory
  std::string course_key;  // course id, with an "m" suffix for mirrored runs
  bool mirrored = false;
};

struct PairStore {
  std::vector<RunRef> runs;
  // Pair run indices address this->runs (global), not per-course lists.
  std::vector<TrainingPair> pairs;

  // key = (course_key, section); every batch is drawn inside one group
  std::string group_key(const TrainingPair& p) const;
};

void save_pair_store(const PairStore& store, const std::string& path);
PairStore load_pair_store(const std::string& path);

// Seeded disjoint exhaustive split; the validation set gets round(fraction*n).
void split_train_val(const std::vector<uint32_t>& pair_ids, float fraction, uint64_t seed,
                     std::vector<uint32_t>& train, std::vector<uint32_t>& val);

// Batches of pair ids: grouped by (course, section), shuffled within the
// group, chunked to batch_size (short tail batch kept), then batch order
// shuffled. Deterministic per (seed, epoch).
std::vector<std::vector<uint32_t>> make_batches(const PairStore& store, const std::vector<uint32_t>& pair_ids,
                                                int batch_size, uint64_t seed, int epoch);

}  // namespace oneshot
