#include "kfe/synthworld.hpp"

#include "kfe/parallel.hpp"
#include "kfe/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace kfe {

namespace {
constexpr double kPi = 3.141592653589793238462643383279502884;
constexpr double kMinHit = 1e-9;

Pose yaw_pose(const Vec3& position, double yaw) {
  Pose p;
  p.t = position;
  p.q = Eigen::Quaterniond(Eigen::AngleAxisd(yaw, Vec3::UnitZ()));
  return p;
}
}  // namespace

World::World(WorldSpec spec) : spec_(std::move(spec)) {
  if (spec_.panels.empty() && spec_.cylinders.empty()) {
    throw std::invalid_argument("World: spec has no surfaces");
  }
  for (const Panel& p : spec_.panels) {
    if (p.axis < 0 || p.axis > 2 || !(p.umax > p.umin) || !(p.vmax > p.vmin)) {
      throw std::invalid_argument("World: panel has zero area or bad axis");
    }
  }
  for (const Cylinder& c : spec_.cylinders) {
    if (!(c.radius > 0.0) || !(c.zmax > c.zmin)) {
      throw std::invalid_argument("World: degenerate cylinder");
    }
  }
}

std::optional<double> World::raycast(const Vec3& origin, const Vec3& dir, double max_range) const {
  double best = max_range;
  bool hit = false;

  for (const Panel& p : spec_.panels) {
    double d_axis = dir[p.axis];
    if (d_axis == 0.0) continue;
    double t = (p.offset - origin[p.axis]) / d_axis;
    if (t <= kMinHit || t >= best) continue;
    int ua = (p.axis + 1) % 3;
    int va = (p.axis + 2) % 3;
    double u = origin[ua] + t * dir[ua];
    double v = origin[va] + t * dir[va];
    if (u < p.umin || u > p.umax || v < p.vmin || v > p.vmax) continue;
    best = t;
    hit = true;
  }

  for (const Cylinder& c : spec_.cylinders) {
    double ox = origin.x() - c.cx, oy = origin.y() - c.cy;
    double a = dir.x() * dir.x() + dir.y() * dir.y();
    if (a == 0.0) continue;
    double b = 2.0 * (ox * dir.x() + oy * dir.y());
    double cc = ox * ox + oy * oy - c.radius * c.radius;
    double disc = b * b - 4.0 * a * cc;
    if (disc < 0.0) continue;
    double sq = std::sqrt(disc);
    for (double t : {(-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)}) {
      if (t <= kMinHit || t >= best) continue;
      double z = origin.z() + t * dir.z();
      if (z < c.zmin || z > c.zmax) continue;
      best = t;
      hit = true;
      break;  // roots are ordered; the first valid one is nearest
    }
  }

  if (!hit) return std::nullopt;
  return best;
}

WorldSpec preset_world(std::string_view name, std::uint64_t seed) {
  WorldSpec w;
  if (name == "corner-room") {
    // Floor plus two orthogonal walls meeting in a corner.
    w.panels.push_back(Panel{2, 0.0, 0.0, 20.0, 0.0, 20.0});  // floor z=0
    w.panels.push_back(Panel{0, 0.0, 0.0, 20.0, 0.0, 6.0});   // wall x=0
    w.panels.push_back(Panel{1, 0.0, 0.0, 6.0, 0.0, 20.0});   // wall y=0
  } else if (name == "corridor") {
    // Exactly two parallel walls plus the floor; nothing bounds travel along y.
    w.panels.push_back(Panel{0, 0.0, 0.0, 60.0, 0.0, 4.0});   // wall x=0
    w.panels.push_back(Panel{0, 4.0, 0.0, 60.0, 0.0, 4.0});   // wall x=4
    w.panels.push_back(Panel{2, 0.0, 0.0, 4.0, 0.0, 60.0});   // floor
  } else if (name == "loop") {
    // Square ring corridor: outer box, inner box, ring floor.
    const double lo = 0.0, hi = 40.0, il = 10.0, ih = 30.0, h = 4.0;
    w.panels.push_back(Panel{0, lo, lo, hi, 0.0, h});
    w.panels.push_back(Panel{0, hi, lo, hi, 0.0, h});
    w.panels.push_back(Panel{1, lo, 0.0, h, lo, hi});
    w.panels.push_back(Panel{1, hi, 0.0, h, lo, hi});
    w.panels.push_back(Panel{0, il, il, ih, 0.0, h});
    w.panels.push_back(Panel{0, ih, il, ih, 0.0, h});
    w.panels.push_back(Panel{1, il, 0.0, h, il, ih});
    w.panels.push_back(Panel{1, ih, 0.0, h, il, ih});
    w.panels.push_back(Panel{2, 0.0, lo, hi, lo, il});
    w.panels.push_back(Panel{2, 0.0, lo, hi, ih, hi});
    w.panels.push_back(Panel{2, 0.0, lo, il, il, ih});
    w.panels.push_back(Panel{2, 0.0, ih, hi, il, ih});
  } else if (name == "forest-proxy") {
    w.panels.push_back(Panel{2, 0.0, 0.0, 80.0, 0.0, 80.0});  // ground
    rng::Generator gen(rng::derive(seed, 0xf0));
    for (int i = 0; i < 120; ++i) {
      Cylinder c;
      c.cx = 5.0 + 70.0 * gen.next_double();
      c.cy = 5.0 + 70.0 * gen.next_double();
      c.radius = 0.2 + 0.3 * gen.next_double();
      c.zmin = 0.0;
      c.zmax = 6.0;
      w.cylinders.push_back(c);
    }
  } else {
    throw std::invalid_argument("preset_world: unknown preset '" + std::string(name) + "'");
  }
  return w;
}

Trajectory preset_trajectory(std::string_view name) {
  Trajectory t;
  auto add = [&](double x, double y, double z) {
    double yaw = 0.0;
    if (!t.waypoints.empty()) {
      Vec3 d = Vec3(x, y, z) - t.waypoints.back().t;
      yaw = std::atan2(d.y(), d.x());
    }
    t.waypoints.push_back(yaw_pose(Vec3(x, y, z), yaw));
  };
  if (name == "corner-room") {
    add(16.0, 16.0, 1.6);
    add(3.0, 3.0, 1.6);
    t.scan_interval = 0.5;
  } else if (name == "corridor") {
    add(2.0, 3.0, 1.5);
    add(2.0, 57.0, 1.5);
    t.scan_interval = 1.0;
  } else if (name == "loop") {
    add(5.0, 5.0, 1.5);
    add(35.0, 5.0, 1.5);
    add(35.0, 35.0, 1.5);
    add(5.0, 35.0, 1.5);
    add(5.0, 5.0, 1.5);
    t.scan_interval = 0.4;
  } else if (name == "forest-proxy") {
    add(10.0, 10.0, 1.5);
    add(70.0, 10.0, 1.5);
    add(70.0, 70.0, 1.5);
    add(10.0, 70.0, 1.5);
    add(10.0, 10.0, 1.5);
    t.scan_interval = 240.0 / 499.0;  // 500 scans around the loop
  } else {
    throw std::invalid_argument("preset_trajectory: unknown preset '" + std::string(name) + "'");
  }
  return t;
}

std::vector<std::string> preset_names() {
  return {"corner-room", "corridor", "loop", "forest-proxy"};
}

PointCloud raycast_scan(const World& world, const Pose& pose, const BeamPattern& pattern,
                        std::uint64_t seed) {
  if (pattern.rings < 1 || pattern.azimuth_steps < 1) {
    throw std::invalid_argument("raycast_scan: pattern must have rings >= 1, steps >= 1");
  }
  const int n_rays = pattern.rings * pattern.azimuth_steps;
  const double lo = pattern.vfov_low_deg * kPi / 180.0;
  const double hi = pattern.vfov_high_deg * kPi / 180.0;
  const Mat3 rot = pose.q.toRotationMatrix();

  // Parallel intersection pass into fixed slots; noise is applied serially in
  // ray order so the cloud is identical for any thread count.
  std::vector<double> hit_t(n_rays, -1.0);
  std::vector<Vec3> dirs(n_rays);
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(thread_count())
#endif
  for (int i = 0; i < n_rays; ++i) {
    int ring = i / pattern.azimuth_steps;
    int step = i % pattern.azimuth_steps;
    double elev = lo + (ring + 0.5) * (hi - lo) / pattern.rings;
    double az = -kPi + (step + 0.5) * 2.0 * kPi / pattern.azimuth_steps;
    Vec3 dir_sensor(std::cos(elev) * std::cos(az), std::cos(elev) * std::sin(az),
                    std::sin(elev));
    dirs[i] = dir_sensor;
    auto t = world.raycast(pose.t, rot * dir_sensor, pattern.max_range);
    if (t) hit_t[i] = *t;
  }

  rng::Generator gen(seed);
  PointCloud cloud;
  cloud.points.reserve(n_rays);
  for (int i = 0; i < n_rays; ++i) {
    if (hit_t[i] < 0.0) continue;
    double range = hit_t[i];
    if (pattern.noise_sigma > 0.0) {
      range = std::max(kMinHit, range + pattern.noise_sigma * gen.next_normal());
    }
    cloud.points.push_back(dirs[i] * range);
  }
  return cloud;
}

std::vector<SessionScan> generate_session(const World& world, const Trajectory& trajectory,
                                          const BeamPattern& pattern, std::uint64_t seed) {
  if (trajectory.waypoints.size() < 2) {
    throw std::invalid_argument("generate_session: need at least two waypoints");
  }
  if (!(trajectory.scan_interval > 0.0)) {
    throw std::invalid_argument("generate_session: scan interval must be positive");
  }

  std::vector<double> cumulative{0.0};
  for (std::size_t i = 1; i < trajectory.waypoints.size(); ++i) {
    double seg = (trajectory.waypoints[i].t - trajectory.waypoints[i - 1].t).norm();
    if (seg == 0.0) {
      throw std::invalid_argument("generate_session: consecutive waypoints must be distinct");
    }
    cumulative.push_back(cumulative.back() + seg);
  }
  const double total = cumulative.back();
  const int n_scans = static_cast<int>(std::floor(total / trajectory.scan_interval + 1e-9)) + 1;

  std::vector<SessionScan> session;
  session.reserve(n_scans);
  std::size_t seg = 1;
  for (int i = 0; i < n_scans; ++i) {
    double s = std::min(total, i * trajectory.scan_interval);
    while (seg + 1 < cumulative.size() && cumulative[seg] < s) ++seg;
    const Pose& a = trajectory.waypoints[seg - 1];
    const Pose& b = trajectory.waypoints[seg];
    double seg_len = cumulative[seg] - cumulative[seg - 1];
    double f = (s - cumulative[seg - 1]) / seg_len;
    Vec3 dir = (b.t - a.t) / seg_len;

    SessionScan scan;
    scan.scan_id = i;
    scan.timestamp = 0.1 * i;
    scan.pose = yaw_pose(a.t + f * (b.t - a.t), std::atan2(dir.y(), dir.x()));
    scan.cloud = raycast_scan(world, scan.pose, pattern, rng::derive(seed, i));
    session.push_back(std::move(scan));
  }
  return session;
}

}  // namespace kfe
