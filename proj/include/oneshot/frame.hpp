#pragma once

#include <string>
#include <vector>

#include "oneshot/render.hpp"
#include "oneshot/tensor.hpp"

namespace oneshot {

inline constexpr float kFps = 15.0f;

struct Frame {
  Tensor image;  // (6,47,84), values in [0,1]
  float steering = 0.0f;  // [-100, 100]
  float throttle = 0.0f;
  int index = 0;
  float timestamp = 0.0f;  // index / fps
};

struct RecordedRun {
  std::vector<Frame> frames;
  std::string course_id;
  uint32_t run_id = 0;
  bool mirrored = false;
  float fps = kFps;

  std::vector<float> steering_trace() const;
};

// OSR1 container, little-endian. Header: magic, version, mirrored flag,
// run id, frame count, width/height/channels, fps, course id. Then per frame:
// raw image floats, steering, throttle.
void save_run(const RecordedRun& run, const std::string& path);
RecordedRun load_run(const std::string& path);

// Horizontal image flip with the eye channel blocks swapped, steering negated,
// mirrored flag toggled. Involution: mirror(mirror(run)) == run bit-exactly.
RecordedRun mirror_run(const RecordedRun& run);
Tensor mirror_image(const Tensor& image);

// Read-only OSR1 view over a memory-mapped file; frame images are served
// straight from the page cache (no per-run copies, which matters when a
// training set holds dozens of runs).
class RunView {
 public:
  explicit RunView(const std::string& path);
  RunView(RunView&&) noexcept;
  RunView& operator=(RunView&&) noexcept;
  RunView(const RunView&) = delete;
  RunView& operator=(const RunView&) = delete;
  ~RunView();

  int frame_count() const { return frame_count_; }
  const float* image(int frame) const;  // 6*47*84 floats
  float steering(int frame) const;
  float throttle(int frame) const;
  const std::string& course_id() const { return course_id_; }
  bool mirrored() const { return mirrored_; }
  std::vector<float> steering_trace() const;

 private:
  void* map_ = nullptr;
  size_t map_len_ = 0;
  const unsigned char* frames_ = nullptr;
  size_t frame_stride_ = 0;
  int frame_count_ = 0;
  std::string course_id_;
  bool mirrored_ = false;
};

}  // namespace oneshot
