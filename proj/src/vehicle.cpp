#include "oneshot/vehicle.hpp"

#include <cmath>

namespace oneshot {

float normalize_angle(float a) {
  while (a > 3.14159265358979323846f) a -= 6.28318530717958647692f;
  while (a <= -3.14159265358979323846f) a += 6.28318530717958647692f;
  return a;
}

VehiclePose step_vehicle(const VehiclePose& pose, float steering, float speed, float dt,
                         const VehicleParams& params) {
  const float s = steering > 100.0f ? 100.0f : (steering < -100.0f ? -100.0f : steering);
  const float delta = s / 100.0f * params.max_wheel_deg * 3.14159265358979323846f / 180.0f;
  VehiclePose next = pose;
  next.x = pose.x + speed * std::cos(pose.heading) * dt;
  next.y = pose.y + speed * std::sin(pose.heading) * dt;
  next.heading = normalize_angle(pose.heading + speed / params.wheelbase_m * std::tan(delta) * dt);
  next.speed = speed;
  return next;
}

bool pose_collides(const CourseSpec& spec, const VehiclePose& pose, float radius_m) {
  // Sample the disc at the center and four axis-aligned extremes.
  const float offsets[5][2] = {{0, 0}, {radius_m, 0}, {-radius_m, 0}, {0, radius_m}, {0, -radius_m}};
  for (const auto& o : offsets)
    if (!spec.is_free_at(pose.x + o[0], pose.y + o[1])) return true;
  return false;
}

}  // namespace oneshot
