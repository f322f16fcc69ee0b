#pragma once

#include "oneshot/course.hpp"
#include "oneshot/tensor.hpp"
#include "oneshot/vehicle.hpp"

namespace oneshot {

inline constexpr int kImgW = 84;
inline constexpr int kImgH = 47;
inline constexpr int kImgC = 6;  // left eye RGB then right eye RGB

// Column raycast over the course grid; values in [0,1]. Left eye occupies
// channels 0-2 (offset -baseline/2 along the vehicle's right axis), right eye
// channels 3-5. Deterministic; throws if the pose is inside a wall.
Tensor render_stereo(const CourseSpec& spec, const VehiclePose& pose);

// Casts a single ray from (x,y); returns the perpendicular-free distance to
// the first wall. Used by the wall-centering controller.
float cast_ray(const CourseSpec& spec, float x, float y, float angle, float max_dist = 50.0f);

}  // namespace oneshot
