#include "oneshot/render.hpp"

#include <cmath>

#include "oneshot/check.hpp"
#include "oneshot/rng.hpp"

namespace oneshot {

namespace {

struct Rgb {
  float r, g, b;
};

Rgb hsv(float h, float s, float v) {
  h = h - std::floor(h / 360.0f) * 360.0f;
  const float c = v * s;
  const float hp = h / 60.0f;
  const float x = c * (1.0f - std::fabs(std::fmod(hp, 2.0f) - 1.0f));
  Rgb rgb{0, 0, 0};
  if (hp < 1) rgb = {c, x, 0};
  else if (hp < 2) rgb = {x, c, 0};
  else if (hp < 3) rgb = {0, c, x};
  else if (hp < 4) rgb = {0, x, c};
  else if (hp < 5) rgb = {x, 0, c};
  else rgb = {c, 0, x};
  const float m = v - c;
  return {rgb.r + m, rgb.g + m, rgb.b + m};
}

// Procedural wall texture. Patterns depend on the fold q = 2*|u-0.5| so that
// a mirrored world samples the same color at the reflected hit point.
Rgb wall_color(uint64_t course_seed, int texid, float q, float v) {
  const uint64_t h = Rng::derive(course_seed, "palette") + static_cast<uint64_t>(texid) * 0x9e3779b97f4a7c15ull;
  const float hue = static_cast<float>(h % 3600) * 0.1f;
  const int kind = static_cast<int>((h >> 8) % 3);
  const int bands = 3 + static_cast<int>((h >> 16) % 4);
  int cell = 0;
  switch (kind) {
    case 0: cell = static_cast<int>(q * static_cast<float>(bands)) % 2; break;
    case 1: cell = static_cast<int>(v * static_cast<float>(bands)) % 2; break;
    default:
      cell = (static_cast<int>(q * static_cast<float>(bands)) + static_cast<int>(v * static_cast<float>(bands))) % 2;
      break;
  }
  const float sat = 0.45f + static_cast<float>((h >> 24) % 32) / 100.0f;
  return hsv(hue, sat, cell ? 0.92f : 0.52f);
}

void render_eye(const CourseSpec& spec, float ex, float ey, float heading, float fov_rad, float* planes) {
  const float fx = std::cos(heading), fy = std::sin(heading);
  const float rx = -std::sin(heading), ry = std::cos(heading);
  const float plane_len = std::tan(fov_rad * 0.5f);
  const uint64_t pal = Rng::derive(spec.seed, "floorceil");
  const Rgb floor_c = hsv(static_cast<float>(pal % 3600) * 0.1f, 0.25f, 0.42f);
  const Rgb ceil_c = hsv(static_cast<float>((pal >> 8) % 3600) * 0.1f, 0.20f, 0.28f);
  const size_t plane_sz = static_cast<size_t>(kImgH) * kImgW;

  for (int col = 0; col < kImgW; ++col) {
    const float cc = 2.0f * (static_cast<float>(col) + 0.5f) / static_cast<float>(kImgW) - 1.0f;
    const float rdx = fx + rx * plane_len * cc;
    const float rdy = fy + ry * plane_len * cc;

    int map_x = static_cast<int>(std::floor(ex));
    int map_y = static_cast<int>(std::floor(ey));
    const float delta_x = rdx == 0.0f ? 1e30f : std::fabs(1.0f / rdx);
    const float delta_y = rdy == 0.0f ? 1e30f : std::fabs(1.0f / rdy);
    int step_x, step_y;
    float side_x, side_y;
    if (rdx < 0) {
      step_x = -1;
      side_x = (ex - static_cast<float>(map_x)) * delta_x;
    } else {
      step_x = 1;
      side_x = (static_cast<float>(map_x) + 1.0f - ex) * delta_x;
    }
    if (rdy < 0) {
      step_y = -1;
      side_y = (ey - static_cast<float>(map_y)) * delta_y;
    } else {
      step_y = 1;
      side_y = (static_cast<float>(map_y) + 1.0f - ey) * delta_y;
    }
    int side = 0;
    for (int it = 0; it < 512; ++it) {
      if (side_x < side_y) {
        side_x += delta_x;
        map_x += step_x;
        side = 0;
      } else {
        side_y += delta_y;
        map_y += step_y;
        side = 1;
      }
      if (spec.is_wall(map_x, map_y)) break;
    }
    float perp = side == 0 ? (static_cast<float>(map_x) - ex + (1.0f - static_cast<float>(step_x)) * 0.5f) / rdx
                           : (static_cast<float>(map_y) - ey + (1.0f - static_cast<float>(step_y)) * 0.5f) / rdy;
    if (perp < 1e-4f) perp = 1e-4f;

    const int line_h = static_cast<int>(static_cast<float>(kImgH) / perp);
    int draw_start = kImgH / 2 - line_h / 2;
    int draw_end = draw_start + line_h;
    const int ds = draw_start < 0 ? 0 : draw_start;
    const int de = draw_end > kImgH ? kImgH : draw_end;

    float wall_x = side == 0 ? ey + perp * rdy : ex + perp * rdx;
    wall_x -= std::floor(wall_x);
    const float q = 2.0f * std::fabs(wall_x - 0.5f);
    const int texid = spec.texture_id(map_x, map_y);
    const float fog = 1.0f / (1.0f + 0.10f * perp);
    const float side_shade = side == 0 ? 0.85f : 1.0f;

    for (int row = 0; row < kImgH; ++row) {
      Rgb c;
      if (row < ds) {
        const float t = static_cast<float>(row) / static_cast<float>(kImgH);
        c = {ceil_c.r * (1.0f - 0.5f * t), ceil_c.g * (1.0f - 0.5f * t), ceil_c.b * (1.0f - 0.5f * t)};
      } else if (row >= de) {
        const float t = static_cast<float>(row) / static_cast<float>(kImgH);
        c = {floor_c.r * (0.4f + 0.6f * t), floor_c.g * (0.4f + 0.6f * t), floor_c.b * (0.4f + 0.6f * t)};
      } else {
        const float v = (static_cast<float>(row) - static_cast<float>(draw_start)) / static_cast<float>(line_h);
        c = wall_color(spec.seed, texid, q, v);
        c = {c.r * fog * side_shade, c.g * fog * side_shade, c.b * fog * side_shade};
      }
      planes[0 * plane_sz + static_cast<size_t>(row) * kImgW + col] = c.r;
      planes[1 * plane_sz + static_cast<size_t>(row) * kImgW + col] = c.g;
      planes[2 * plane_sz + static_cast<size_t>(row) * kImgW + col] = c.b;
    }
  }
}

}  // namespace

Tensor render_stereo(const CourseSpec& spec, const VehiclePose& pose) {
  check(spec.is_free_at(pose.x, pose.y), "render: pose (", pose.x, ",", pose.y, ") is inside a wall");
  const float fov = spec.camera.fov_deg * 3.14159265358979323846f / 180.0f;
  const float rx = -std::sin(pose.heading), ry = std::cos(pose.heading);
  const float half = spec.camera.baseline_m * 0.5f;
  Tensor img({kImgC, kImgH, kImgW});
  const size_t plane_sz = static_cast<size_t>(kImgH) * kImgW;
  // left eye: channels 0-2; right eye: 3-5
  render_eye(spec, pose.x - rx * half, pose.y - ry * half, pose.heading, fov, img.data());
  render_eye(spec, pose.x + rx * half, pose.y + ry * half, pose.heading, fov, img.data() + 3 * plane_sz);
  return img;
}

float cast_ray(const CourseSpec& spec, float x, float y, float angle, float max_dist) {
  const float rdx = std::cos(angle), rdy = std::sin(angle);
  int map_x = static_cast<int>(std::floor(x));
  int map_y = static_cast<int>(std::floor(y));
  const float delta_x = rdx == 0.0f ? 1e30f : std::fabs(1.0f / rdx);
  const float delta_y = rdy == 0.0f ? 1e30f : std::fabs(1.0f / rdy);
  int step_x, step_y;
  float side_x, side_y;
  if (rdx < 0) {
    step_x = -1;
    side_x = (x - static_cast<float>(map_x)) * delta_x;
  } else {
    step_x = 1;
    side_x = (static_cast<float>(map_x) + 1.0f - x) * delta_x;
  }
  if (rdy < 0) {
    step_y = -1;
    side_y = (y - static_cast<float>(map_y)) * delta_y;
  } else {
    step_y = 1;
    side_y = (static_cast<float>(map_y) + 1.0f - y) * delta_y;
  }
  int side = 0;
  for (int it = 0; it < 1024; ++it) {
    if (side_x < side_y) {
      side_x += delta_x;
      map_x += step_x;
      side = 0;
    } else {
      side_y += delta_y;
      map_y += step_y;
      side = 1;
    }
    if (spec.is_wall(map_x, map_y)) break;
  }
  const float perp = side == 0 ? (static_cast<float>(map_x) - x + (1.0f - static_cast<float>(step_x)) * 0.5f) / rdx
                               : (static_cast<float>(map_y) - y + (1.0f - static_cast<float>(step_y)) * 0.5f) / rdy;
  return perp > max_dist ? max_dist : perp;
}

}  // namespace oneshot
