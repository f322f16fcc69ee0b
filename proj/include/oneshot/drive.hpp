#pragma once

#include <cstdint>

#include "oneshot/frame.hpp"
#include "oneshot/vehicle.hpp"

namespace oneshot {

struct DriveParams {
  float speed_mps = 0.7f;
  float fps = kFps;
  float lookahead_m = 1.2f;
  float steer_noise = 3.0f;       // per-frame steering jitter, sigma in steering units
  float lateral_noise_m = 0.03f;  // per-waypoint lateral jitter, sigma in meters
  float waypoint_radius_m = 0.45f;
  int timeout_factor = 4;         // budget = factor * ideal frame count
};

// Pure-pursuit waypoint follower; records image + steering + throttle at every
// step. Seeded noise perturbs steering and the waypoint line so repeated runs
// of one course differ like repeated manual drives. Throws on wall contact or
// waypoint timeout, with the pose in the message.
RecordedRun scripted_drive(const CourseSpec& spec, uint64_t noise_seed, const DriveParams& drive = {},
                           const VehicleParams& vehicle = {});

// Steering command toward a lookahead point; the core of the scripted driver,
// exposed for tests.
float pure_pursuit_steering(const VehiclePose& pose, Vec2 target, const VehicleParams& vehicle);

VehiclePose course_start_pose(const CourseSpec& spec, float speed);

}  // namespace oneshot
