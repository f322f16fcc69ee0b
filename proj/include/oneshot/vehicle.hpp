#pragma once

#include "oneshot/course.hpp"

namespace oneshot {

// Heading 0 points along +x; positive heading turns toward +y (grid rows), so
// positive steering is a right turn in image space.
struct VehiclePose {
  float x = 0.0f;
  float y = 0.0f;
  float heading = 0.0f;  // radians, normalized to (-pi, pi]
  float speed = 0.0f;    // m/s
};

struct VehicleParams {
  float wheelbase_m = 0.5f;
  float max_wheel_deg = 30.0f;     // wheel angle at steering +-100
  float collision_radius_m = 0.15f;
};

float normalize_angle(float a);

// Kinematic bicycle step; steering in [-100, 100] (clamped), linear map to
// wheel angle.
VehiclePose step_vehicle(const VehiclePose& pose, float steering, float speed, float dt,
                         const VehicleParams& params = {});

bool pose_collides(const CourseSpec& spec, const VehiclePose& pose, float radius_m);

}  // namespace oneshot
