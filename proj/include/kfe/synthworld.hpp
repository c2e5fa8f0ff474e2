#pragma once

#include "kfe/geometry.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace kfe {

/// Axis-aligned rectangular panel: plane `coord[axis] == offset`, bounded on
/// the two remaining axes (u = (axis+1)%3, v = (axis+2)%3).
struct Panel {
  int axis = 2;
  double offset = 0.0;
  double umin = 0.0, umax = 0.0;
  double vmin = 0.0, vmax = 0.0;
};

/// Vertical cylinder (forest-proxy obstacle).
struct Cylinder {
  double cx = 0.0, cy = 0.0;
  double radius = 0.0;
  double zmin = 0.0, zmax = 0.0;
};

struct WorldSpec {
  std::vector<Panel> panels;
  std::vector<Cylinder> cylinders;
};

struct Trajectory {
  std::vector<Pose> waypoints;
  double scan_interval = 1.0;  // meters of travel between scans
};

struct BeamPattern {
  int rings = 16;
  int azimuth_steps = 360;
  double vfov_low_deg = -22.5;
  double vfov_high_deg = 22.5;
  double max_range = 60.0;
  double noise_sigma = 0.01;  // meters
};

/// Immutable ray-castable world. Throws on empty specs or zero-area panels.
class World {
 public:
  explicit World(WorldSpec spec);

  /// Distance to the nearest surface along `dir` (unit), or nullopt.
  std::optional<double> raycast(const Vec3& origin, const Vec3& dir, double max_range) const;

  const WorldSpec& spec() const { return spec_; }

 private:
  WorldSpec spec_;
};

/// Named scene presets: corner-room, corridor, loop, forest-proxy.
WorldSpec preset_world(std::string_view name, std::uint64_t seed);
Trajectory preset_trajectory(std::string_view name);
std::vector<std::string> preset_names();

/// One ray per (ring, azimuth step); nearest hit within max range, Gaussian
/// range noise from the seed. Returned points are in the sensor frame;
/// no-hit rays are dropped. Deterministic given (world, pose, pattern, seed).
PointCloud raycast_scan(const World& world, const Pose& pose, const BeamPattern& pattern,
                        std::uint64_t seed);

struct SessionScan {
  int scan_id = 0;
  double timestamp = 0.0;
  Pose pose;          // ground truth
  PointCloud cloud;   // sensor frame
};

/// Scans sampled every `scan_interval` meters along the waypoint polyline,
/// each paired with its exact pose. Scan i uses the derived seed (seed, i).
std::vector<SessionScan> generate_session(const World& world, const Trajectory& trajectory,
                                          const BeamPattern& pattern, std::uint64_t seed);

}  // namespace kfe
