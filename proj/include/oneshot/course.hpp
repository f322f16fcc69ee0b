#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace oneshot {

struct Vec2 {
  float x = 0.0f;
  float y = 0.0f;
};

struct CameraParams {
  float fov_deg = 66.0f;
  float baseline_m = 0.12f;
};

// Grid world, 1 m cells. '#' is a wall, '.' free space, digits are walls with
// that texture id. x grows with the column index, y with the row index.
struct CourseSpec {
  std::vector<std::string> grid;
  std::vector<Vec2> waypoints;
  uint64_t seed = 0;
  CameraParams camera;
  std::string name;  // optional; id() falls back to a content hash

  int width() const { return grid.empty() ? 0 : static_cast<int>(grid[0].size()); }
  int height() const { return static_cast<int>(grid.size()); }
  bool in_bounds(int cx, int cy) const { return cx >= 0 && cy >= 0 && cx < width() && cy < height(); }
  // Out-of-bounds counts as wall so rays always terminate.
  bool is_wall(int cx, int cy) const { return !in_bounds(cx, cy) || grid[static_cast<size_t>(cy)][static_cast<size_t>(cx)] != '.'; }
  bool is_free_at(float x, float y) const;
  // 0 for '#', 1..10 for digits.
  int texture_id(int cx, int cy) const;

  std::string id() const;
};

CourseSpec load_course_spec(const std::string& json_text);
CourseSpec load_course_file(const std::string& path);
std::string course_to_json(const CourseSpec& spec);
void save_course_file(const CourseSpec& spec, const std::string& path);

// Throws with a line/field diagnostic on the first violated invariant.
void validate_course(const CourseSpec& spec);

// Horizontal reflection; a distinct course (name gets an "m" suffix).
CourseSpec mirror_course(const CourseSpec& spec);

struct CourseGenOptions {
  int turns = 1;
  int seg_min_cells = 6;
  int seg_max_cells = 9;
};

// Deterministic corridor course with the given number of 90-degree turns.
CourseSpec generate_course(uint64_t seed, const CourseGenOptions& opts = {});

}  // namespace oneshot
