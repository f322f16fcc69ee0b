#pragma once

#include <string>
#include <vector>

#include "oneshot/frame.hpp"

namespace oneshot {

enum class Direction { straight, left, right };

const char* direction_name(Direction d);

inline constexpr int kSectionEndFrames = 15;
inline constexpr int kWindowFrames = 10;
inline constexpr int kTestBufferFrames = 15;
inline constexpr int kTrainingBufferFrames = 10;

// One section: inclusive frame range [start, end]. The section end is the
// last 15 frames; everything before it is the body. Derived ranges follow the
// fixed symbol mapping: n_j (last body frame) = end - 15.
struct Section {
  Direction dir = Direction::straight;
  int start = 0;
  int end = 0;

  int length() const { return end - start + 1; }
  int end_start() const { return end - (kSectionEndFrames - 1); }  // first section-end frame
  int body_start() const { return start; }
  int body_end() const { return end - kSectionEndFrames; }  // n_j; < start when the section is short
  int buffer_start() const { return body_end() - (kTestBufferFrames - 1); }
  bool usable_for_pairs() const { return length() >= kSectionEndFrames + kWindowFrames; }
};

struct SectionLayout {
  std::vector<Section> sections;
  int frame_count = 0;

  int section_of(int frame) const;  // -1 if out of range
  std::vector<Direction> directions() const;
};

// Appendix-style split on the normalized steering trace: frames default to
// straight; a maximal block with |steering| > 25 whose peak |steering| >= 90
// becomes a turn section (left for a negative peak, right for positive);
// blocks that never reach 90 stay straight.
inline constexpr float kTurnThreshold = 25.0f;
inline constexpr float kPeakThreshold = 90.0f;

SectionLayout split_sections(const std::vector<float>& steering);
SectionLayout split_sections(const RecordedRun& run);

// Affine map from a raw steering reading to [-100, 100]; -100 is full left.
float normalize_steering(float raw, float cal_min, float cal_max);

}  // namespace oneshot
