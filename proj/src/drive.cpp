#include "oneshot/drive.hpp"

#include <cmath>

#include "oneshot/check.hpp"
#include "oneshot/rng.hpp"

namespace oneshot {

float pure_pursuit_steering(const VehiclePose& pose, Vec2 target, const VehicleParams& vehicle) {
  const float dx = target.x - pose.x;
  const float dy = target.y - pose.y;
  const float dist = std::sqrt(dx * dx + dy * dy);
  if (dist < 1e-4f) return 0.0f;
  const float alpha = normalize_angle(std::atan2(dy, dx) - pose.heading);
  const float delta = std::atan2(2.0f * vehicle.wheelbase_m * std::sin(alpha), dist);
  const float max_rad = vehicle.max_wheel_deg * 3.14159265358979323846f / 180.0f;
  float steering = delta / max_rad * 100.0f;
  return steering > 100.0f ? 100.0f : (steering < -100.0f ? -100.0f : steering);
}

VehiclePose course_start_pose(const CourseSpec& spec, float speed) {
  check(spec.waypoints.size() >= 2, "drive: course needs at least 2 waypoints");
  const Vec2 a = spec.waypoints[0], b = spec.waypoints[1];
  VehiclePose pose;
  pose.x = a.x;
  pose.y = a.y;
  pose.heading = std::atan2(b.y - a.y, b.x - a.x);
  pose.speed = speed;
  return pose;
}

namespace {

// Arc-length lookahead along the waypoint polyline, starting from the segment
// the vehicle currently tracks.
Vec2 lookahead_point(const std::vector<Vec2>& wps, size_t seg, const VehiclePose& pose, float lookahead) {
  // Projection of the pose onto the current segment.
  Vec2 p{pose.x, pose.y};
  float remaining = lookahead;
  for (size_t i = seg; i + 1 < wps.size(); ++i) {
    const Vec2 a = i == seg ? p : wps[i];
    const Vec2 b = wps[i + 1];
    const float dx = b.x - a.x, dy = b.y - a.y;
    const float len = std::sqrt(dx * dx + dy * dy);
    if (len >= remaining || i + 2 == wps.size()) {
      const float t = len < 1e-6f ? 1.0f : std::min(1.0f, remaining / len);
      return {a.x + t * dx, a.y + t * dy};
    }
    remaining -= len;
  }
  return wps.back();
}

}  // namespace

RecordedRun scripted_drive(const CourseSpec& spec, uint64_t noise_seed, const DriveParams& drive,
                           const VehicleParams& vehicle) {
  validate_course(spec);
  Rng rng(Rng::derive(noise_seed, "drive"));

  // Jitter the waypoint line laterally so repeated runs differ.
  std::vector<Vec2> wps = spec.waypoints;
  for (size_t i = 1; i + 1 < wps.size(); ++i) {
    const Vec2 a = wps[i - 1], b = wps[i + 1];
    float nx = -(b.y - a.y), ny = b.x - a.x;
    const float nl = std::sqrt(nx * nx + ny * ny);
    if (nl > 1e-6f) {
      nx /= nl;
      ny /= nl;
      const float off = drive.lateral_noise_m * rng.normal();
      wps[i].x += nx * off;
      wps[i].y += ny * off;
    }
  }

  float path_len = 0.0f;
  for (size_t i = 0; i + 1 < wps.size(); ++i) {
    const float dx = wps[i + 1].x - wps[i].x, dy = wps[i + 1].y - wps[i].y;
    path_len += std::sqrt(dx * dx + dy * dy);
  }
  const float dt = 1.0f / drive.fps;
  const int budget = static_cast<int>(path_len / drive.speed_mps * drive.fps) * drive.timeout_factor + 60;

  RecordedRun run;
  run.course_id = spec.id();
  run.fps = drive.fps;
  VehiclePose pose = course_start_pose(spec, drive.speed_mps);
  size_t seg = 0;

  for (int frame = 0; frame < budget; ++frame) {
    // Advance the tracked segment once the next waypoint is close or passed.
    while (seg + 1 < wps.size()) {
      const Vec2 next = wps[seg + 1];
      const float dx = next.x - pose.x, dy = next.y - pose.y;
      const float d = std::sqrt(dx * dx + dy * dy);
      const bool last = seg + 2 == wps.size();
      if (d < (last ? drive.waypoint_radius_m : drive.waypoint_radius_m + 0.25f)) {
        ++seg;
      } else {
        break;
      }
    }
    if (seg + 1 >= wps.size()) break;  // reached the final waypoint

    const Vec2 target = lookahead_point(wps, seg, pose, drive.lookahead_m);
    float steering = pure_pursuit_steering(pose, target, vehicle);
    steering += drive.steer_noise * rng.normal();
    steering = steering > 100.0f ? 100.0f : (steering < -100.0f ? -100.0f : steering);

    Frame f;
    f.image = render_stereo(spec, pose);
    f.steering = steering;
    f.throttle = drive.speed_mps;
    f.index = frame;
    f.timestamp = static_cast<float>(frame) / drive.fps;
    run.frames.push_back(std::move(f));

    pose = step_vehicle(pose, steering, drive.speed_mps, dt, vehicle);
    if (pose_collides(spec, pose, vehicle.collision_radius_m))
      throw std::runtime_error(strcat_msg("drive: collision at frame ", frame, ", pose (", pose.x, ",", pose.y,
                                          ",", pose.heading, ") on course ", spec.id()));
  }
  check(seg + 1 >= wps.size(), "drive: waypoint timeout after ", budget, " frames at pose (", pose.x, ",", pose.y,
        ") heading ", pose.heading, " on course ", spec.id());
  check(run.frames.size() >= 30, "drive: run too short (", run.frames.size(), " frames)");
  return run;
}

}  // namespace oneshot
