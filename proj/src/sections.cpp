#include "oneshot/sections.hpp"

#include <cmath>

#include "oneshot/check.hpp"

namespace oneshot {

const char* direction_name(Direction d) {
  switch (d) {
    case Direction::left: return "left";
    case Direction::right: return "right";
    default: return "straight";
  }
}

int SectionLayout::section_of(int frame) const {
  for (size_t j = 0; j < sections.size(); ++j)
    if (frame >= sections[j].start && frame <= sections[j].end) return static_cast<int>(j);
  return -1;
}

std::vector<Direction> SectionLayout::directions() const {
  std::vector<Direction> d;
  d.reserve(sections.size());
  for (const auto& s : sections) d.push_back(s.dir);
  return d;
}

SectionLayout split_sections(const std::vector<float>& steering) {
  check(!steering.empty(), "split_sections: empty run");
  const int n = static_cast<int>(steering.size());
  std::vector<Direction> label(static_cast<size_t>(n), Direction::straight);

  int i = 0;
  while (i < n) {
    if (std::fabs(steering[static_cast<size_t>(i)]) <= kTurnThreshold) {
      ++i;
      continue;
    }
    int j = i;
    float peak = steering[static_cast<size_t>(i)];
    while (j + 1 < n && std::fabs(steering[static_cast<size_t>(j + 1)]) > kTurnThreshold) {
      ++j;
      if (std::fabs(steering[static_cast<size_t>(j)]) > std::fabs(peak)) peak = steering[static_cast<size_t>(j)];
    }
    if (std::fabs(peak) >= kPeakThreshold) {
      const Direction dir = peak < 0.0f ? Direction::left : Direction::right;
      for (int k = i; k <= j; ++k) label[static_cast<size_t>(k)] = dir;
    }
    i = j + 1;
  }

  SectionLayout layout;
  layout.frame_count = n;
  int start = 0;
  for (int k = 1; k <= n; ++k) {
    if (k == n || label[static_cast<size_t>(k)] != label[static_cast<size_t>(start)]) {
      layout.sections.push_back({label[static_cast<size_t>(start)], start, k - 1});
      start = k;
    }
  }
  return layout;
}

SectionLayout split_sections(const RecordedRun& run) { return split_sections(run.steering_trace()); }

float normalize_steering(float raw, float cal_min, float cal_max) {
  check(cal_min < cal_max, "normalize_steering: degenerate calibration [", cal_min, ", ", cal_max, "]");
  const float v = -100.0f + 200.0f * (raw - cal_min) / (cal_max - cal_min);
  return v > 100.0f ? 100.0f : (v < -100.0f ? -100.0f : v);
}

}  // namespace oneshot
