#include "oneshot/course.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "oneshot/check.hpp"
#include "oneshot/rng.hpp"

namespace oneshot {

using nlohmann::ordered_json;

bool CourseSpec::is_free_at(float x, float y) const {
  const int cx = static_cast<int>(std::floor(x));
  const int cy = static_cast<int>(std::floor(y));
  return !is_wall(cx, cy);
}

int CourseSpec::texture_id(int cx, int cy) const {
  if (!in_bounds(cx, cy)) return 0;
  const char c = grid[static_cast<size_t>(cy)][static_cast<size_t>(cx)];
  return c >= '0' && c <= '9' ? 1 + (c - '0') : 0;
}

std::string CourseSpec::id() const {
  if (!name.empty()) return name;
  uint64_t h = 1469598103934665603ull;
  auto mix = [&h](const void* data, size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 1099511628211ull;
    }
  };
  for (const auto& row : grid) mix(row.data(), row.size());
  for (const auto& w : waypoints) {
    mix(&w.x, sizeof(w.x));
    mix(&w.y, sizeof(w.y));
  }
  mix(&seed, sizeof(seed));
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%08x", static_cast<unsigned>(h & 0xffffffffu));
  return std::string("c") + buf;
}

CourseSpec load_course_spec(const std::string& json_text) {
  ordered_json j;
  try {
    j = ordered_json::parse(json_text);
  } catch (const std::exception& e) {
    throw std::invalid_argument(std::string("course: malformed document: ") + e.what());
  }
  CourseSpec spec;
  check(j.contains("grid") && j["grid"].is_array(), "course: missing 'grid' array");
  for (const auto& row : j["grid"]) {
    check(row.is_string(), "course: grid rows must be strings");
    spec.grid.push_back(row.get<std::string>());
  }
  check(j.contains("waypoints") && j["waypoints"].is_array(), "course: missing 'waypoints' array");
  for (const auto& w : j["waypoints"]) {
    check(w.is_array() && w.size() == 2, "course: waypoints must be [x, y] pairs");
    spec.waypoints.push_back({w[0].get<float>(), w[1].get<float>()});
  }
  check(j.contains("seed"), "course: missing 'seed'");
  spec.seed = j["seed"].get<uint64_t>();
  if (j.contains("camera")) {
    const auto& cam = j["camera"];
    if (cam.contains("fov_deg")) spec.camera.fov_deg = cam["fov_deg"].get<float>();
    if (cam.contains("baseline_m")) spec.camera.baseline_m = cam["baseline_m"].get<float>();
  }
  if (j.contains("name")) spec.name = j["name"].get<std::string>();
  validate_course(spec);
  return spec;
}

CourseSpec load_course_file(const std::string& path) {
  std::ifstream in(path);
  check(in.good(), "course: cannot open ", path);
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return load_course_spec(buf.str());
  } catch (const std::exception& e) {
    throw std::invalid_argument(path + ": " + e.what());
  }
}

std::string course_to_json(const CourseSpec& spec) {
  ordered_json j;
  if (!spec.name.empty()) j["name"] = spec.name;
  j["seed"] = spec.seed;
  j["camera"] = {{"fov_deg", spec.camera.fov_deg}, {"baseline_m", spec.camera.baseline_m}};
  j["grid"] = spec.grid;
  j["waypoints"] = ordered_json::array();
  for (const auto& w : spec.waypoints) j["waypoints"].push_back({w.x, w.y});
  return j.dump(2) + "\n";
}

void save_course_file(const CourseSpec& spec, const std::string& path) {
  std::ofstream out(path);
  check(out.good(), "course: cannot write ", path);
  out << course_to_json(spec);
}

void validate_course(const CourseSpec& spec) {
  check(!spec.grid.empty(), "course: empty grid");
  const size_t w = spec.grid[0].size();
  for (size_t r = 0; r < spec.grid.size(); ++r) {
    check(spec.grid[r].size() == w, "course: grid row ", r, " length ", spec.grid[r].size(),
          " differs from row 0 length ", w);
    for (size_t c = 0; c < spec.grid[r].size(); ++c) {
      const char ch = spec.grid[r][c];
      check(ch == '#' || ch == '.' || (ch >= '0' && ch <= '9'), "course: grid row ", r, " col ", c,
            ": invalid cell '", ch, "'");
    }
  }
  check(spec.waypoints.size() >= 2, "course: need at least 2 waypoints, got ", spec.waypoints.size());
  check(spec.camera.baseline_m > 0.0f, "course: camera.baseline_m must be positive");
  check(spec.camera.fov_deg > 10.0f && spec.camera.fov_deg < 160.0f, "course: camera.fov_deg out of range");
  for (size_t i = 0; i < spec.waypoints.size(); ++i) {
    const auto& p = spec.waypoints[i];
    check(spec.is_free_at(p.x, p.y), "course: waypoint ", i, " at (", p.x, ",", p.y, ") lies in a wall cell");
  }
  for (size_t i = 0; i + 1 < spec.waypoints.size(); ++i) {
    const auto& a = spec.waypoints[i];
    const auto& b = spec.waypoints[i + 1];
    const float dx = b.x - a.x, dy = b.y - a.y;
    const float len = std::sqrt(dx * dx + dy * dy);
    check(len > 1e-3f, "course: waypoints ", i, " and ", i + 1, " coincide");
    const int steps = static_cast<int>(len / 0.05f) + 1;
    for (int s = 0; s <= steps; ++s) {
      const float t = static_cast<float>(s) / static_cast<float>(steps);
      check(spec.is_free_at(a.x + t * dx, a.y + t * dy), "course: segment between waypoints ", i, " and ", i + 1,
            " crosses a wall");
    }
  }
}

CourseSpec mirror_course(const CourseSpec& spec) {
  CourseSpec m = spec;
  for (auto& row : m.grid) std::reverse(row.begin(), row.end());
  const float wm = static_cast<float>(spec.width());
  for (auto& p : m.waypoints) p.x = wm - p.x;
  m.name = spec.id() + "m";
  return m;
}

CourseSpec generate_course(uint64_t seed, const CourseGenOptions& opts) {
  check(opts.turns >= 0 && opts.turns <= 4, "course gen: turns must be in [0,4]");
  check(opts.seg_min_cells >= 5 && opts.seg_max_cells >= opts.seg_min_cells, "course gen: bad segment lengths");
  Rng rng(Rng::derive(seed, "course-gen"));

  // Carve on a large scratch canvas, then crop.
  const int cw = 96, ch = 96;
  std::vector<std::string> canvas(ch, std::string(cw, '#'));
  auto carve = [&canvas](int x, int y) {
    if (x >= 0 && y >= 0 && x < 96 && y < 96) canvas[static_cast<size_t>(y)][static_cast<size_t>(x)] = '.';
  };

  // Corner points live on the integer lattice; the corridor spans the two
  // cell rows/columns on either side of the centerline.
  int px = 48, py = 48;
  int dx = 1, dy = 0;
  std::vector<Vec2> corners;
  corners.push_back({static_cast<float>(px), static_cast<float>(py)});
  const int nseg = opts.turns + 1;
  for (int s = 0; s < nseg; ++s) {
    const int len = opts.seg_min_cells + rng.below(opts.seg_max_cells - opts.seg_min_cells + 1);
    const int nx = px + dx * len, ny = py + dy * len;
    if (dx != 0) {
      const int x0 = std::min(px, nx) - 1, x1 = std::max(px, nx);
      for (int x = x0; x <= x1; ++x) {
        carve(x, py - 1);
        carve(x, py);
      }
    } else {
      const int y0 = std::min(py, ny) - 1, y1 = std::max(py, ny);
      for (int y = y0; y <= y1; ++y) {
        carve(px - 1, y);
        carve(px, y);
      }
    }
    px = nx;
    py = ny;
    corners.push_back({static_cast<float>(px), static_cast<float>(py)});
    if (s + 1 < nseg) {
      // rotate left or right by 90 degrees
      const bool right = rng.below(2) == 1;
      const int ndx = right ? -dy : dy;
      const int ndy = right ? dx : -dx;
      dx = ndx;
      dy = ndy;
    }
  }

  // Crop to the carved bounding box plus a one-cell wall border.
  int minx = cw, miny = ch, maxx = 0, maxy = 0;
  for (int y = 0; y < ch; ++y)
    for (int x = 0; x < cw; ++x)
      if (canvas[static_cast<size_t>(y)][static_cast<size_t>(x)] == '.') {
        minx = std::min(minx, x);
        miny = std::min(miny, y);
        maxx = std::max(maxx, x);
        maxy = std::max(maxy, y);
      }
  const int ox = minx - 1, oy = miny - 1;
  CourseSpec spec;
  spec.seed = seed;
  for (int y = oy; y <= maxy + 1; ++y) spec.grid.push_back(canvas[static_cast<size_t>(y)].substr(static_cast<size_t>(ox), static_cast<size_t>(maxx - minx + 3)));

  // Texture every wall cell that faces free space.
  for (int y = 0; y < spec.height(); ++y)
    for (int x = 0; x < spec.width(); ++x) {
      if (spec.grid[static_cast<size_t>(y)][static_cast<size_t>(x)] == '.') continue;
      bool faces_free = false;
      for (int ddy = -1; ddy <= 1 && !faces_free; ++ddy)
        for (int ddx = -1; ddx <= 1; ++ddx)
          if (!(ddx == 0 && ddy == 0) && spec.in_bounds(x + ddx, y + ddy) && !spec.is_wall(x + ddx, y + ddy)) {
            faces_free = true;
            break;
          }
      if (faces_free) spec.grid[static_cast<size_t>(y)][static_cast<size_t>(x)] = static_cast<char>('0' + rng.below(10));
    }

  // Waypoints: inset start/end; corners become entry/exit pairs so the
  // follower takes a wide arc and turn sections come out long enough to
  // host negative windows.
  const auto shift = [ox, oy](Vec2 p) { return Vec2{p.x - static_cast<float>(ox), p.y - static_cast<float>(oy)}; };
  const auto unit_toward = [](Vec2 a, Vec2 b) {
    float dx = b.x - a.x, dy = b.y - a.y;
    const float len = std::sqrt(dx * dx + dy * dy);
    return Vec2{dx / len, dy / len};
  };
  const float corner_r = 0.9f;
  std::vector<Vec2> wps;
  const Vec2 first = shift(corners.front());
  const Vec2 fdir = unit_toward(first, shift(corners[1]));
  wps.push_back({first.x + 1.3f * fdir.x, first.y + 1.3f * fdir.y});
  for (size_t i = 1; i + 1 < corners.size(); ++i) {
    const Vec2 c = shift(corners[i]);
    const Vec2 in_dir = unit_toward(shift(corners[i - 1]), c);
    const Vec2 out_dir = unit_toward(c, shift(corners[i + 1]));
    wps.push_back({c.x - corner_r * in_dir.x, c.y - corner_r * in_dir.y});
    wps.push_back({c.x + corner_r * out_dir.x, c.y + corner_r * out_dir.y});
  }
  const Vec2 last = shift(corners.back());
  const Vec2 ldir = unit_toward(shift(corners[corners.size() - 2]), last);
  wps.push_back({last.x - 0.4f * ldir.x, last.y - 0.4f * ldir.y});
  spec.waypoints = std::move(wps);

  char namebuf[32];
  std::snprintf(namebuf, sizeof(namebuf), "c%llu", static_cast<unsigned long long>(seed & 0xffffff));
  spec.name = namebuf;
  validate_course(spec);
  return spec;
}

}  // namespace oneshot
